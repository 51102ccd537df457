//! Command-line front end.
//!
//! Angles given as flags are in degrees; JSON configs and outputs use radians.
//! Exit codes: 0 success, 2 validation error, 1 runtime error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::classes::{build_full, check_reduced_form, class_spec, LieTriple, ParamVector, SymmetryClass};
use crate::error::{Error, Result};
use crate::field::{interpolate_field, sample_random_field, FieldConfig, FieldSample, Grid1D};
use crate::kelvin::{directional_young_modulus, orthotropic_kelvin, Direction, KelvinMatrix, OrthotropicConstants};
use crate::lie::exp_so3;
use crate::linalg::{block_diag, rows_of, upper_triangle};
use crate::means::{mean_euclid, mean_log_euclid, mean_product, KarcherOptions, MeanResult, WeightedEnsemble};
use crate::metrics::{upper_triangle_names, InterpolationPath, MetricKind, MetricWeights};
use crate::stochastic::{random_kelvin, GenConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum MetricArg {
    Euclid,
    Product,
    LogEuclid,
}

impl From<MetricArg> for MetricKind {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Euclid => MetricKind::Euclid,
            MetricArg::Product => MetricKind::Product,
            MetricArg::LogEuclid => MetricKind::LogEuclid,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "kelvin", version, about = "Kelvin-matrix elasticity tensors: build, sample, interpolate, average")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// RNG seed (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    /// Output file (directory for bone-demo); stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Symmetry class, e.g. ortho_3d.
    #[arg(long, global = true)]
    pub class: Option<SymmetryClass>,
    #[arg(long, global = true, value_enum, default_value = "product")]
    pub metric: MetricArg,
    /// Weight of the spatial-rotation term of the product distance.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub cv: f64,
    /// Weight of the eigen-strain term of the product distance.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub ct: f64,
    /// Tolerance for class checks.
    #[arg(long, global = true, default_value_t = crate::classes::CHECK_TOL)]
    pub tol: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the symmetry classes with parameter counts and Hasse parents.
    Classes,
    /// Build a Kelvin matrix from class parameters.
    Build(BuildArgs),
    /// Draw random Kelvin matrices from a generator config.
    Sample(SampleArgs),
    /// Sample the geodesic between two tensors.
    Interpolate(InterpolateArgs),
    /// Weighted Fréchet mean of an ensemble.
    Mean(MeanArgs),
    /// Random or interpolated 1D fields.
    Field(FieldArgs),
    /// Directional Young's modulus over a (θ, φ) grid.
    Ymod(YmodArgs),
    /// Cortical bone interpolation demo (six CSV traces and a summary).
    BoneDemo(BoneArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// JSON config with `class` and `z0` (radians).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Spatial rotation parameters in degrees.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub q: Vec<f64>,
    /// Eigen-strain parameters in degrees.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub p: Vec<f64>,
    /// Log-moduli (natural log of GPa).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub mu: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// GenConfig JSON.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
}

#[derive(Debug, Args)]
pub struct InterpolateArgs {
    /// Start tensor: LieTriple JSON `{q, v, lambda}` or Kelvin matrix JSON `{dim, unit, rows}`.
    #[arg(long)]
    pub from: PathBuf,
    #[arg(long)]
    pub to: PathBuf,
    /// Number of samples including both endpoints.
    #[arg(long, default_value_t = 11)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct MeanArgs {
    /// JSON array of tensors, or `{"items": [...], "weights": [...]}`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
pub struct FieldArgs {
    /// FieldConfig JSON for random fields.
    #[arg(long, conflicts_with_all = ["from", "to"])]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Interpolation field endpoints.
    #[arg(long, requires = "to")]
    pub from: Option<PathBuf>,
    #[arg(long, requires = "from")]
    pub to: Option<PathBuf>,
    #[arg(long, default_value_t = 101)]
    pub grid_n: usize,
}

#[derive(Debug, Args)]
pub struct YmodArgs {
    /// Tensor JSON; the cortical bone matrix when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 37)]
    pub n_theta: usize,
    #[arg(long, default_value_t = 73)]
    pub n_phi: usize,
}

#[derive(Debug, Args)]
pub struct BoneArgs {
    #[arg(long, default_value_t = 101)]
    pub grid_n: usize,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                1
            }
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    if g.tol.is_nan() || g.tol <= 0.0 {
        return Err(Error::Invalid("--tol must be positive".into()));
    }
    match &cli.command {
        Command::Classes => cmd_classes(g),
        Command::Build(a) => cmd_build(g, a),
        Command::Sample(a) => cmd_sample(g, a),
        Command::Interpolate(a) => cmd_interpolate(g, a),
        Command::Mean(a) => cmd_mean(g, a),
        Command::Field(a) => cmd_field(g, a),
        Command::Ymod(a) => cmd_ymod(g, a),
        Command::BoneDemo(a) => cmd_bone_demo(g, a),
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<W: Write>(mut out: W, v: &impl Serialize) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, v)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Reads JSON with the file path and the offending field in error messages.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        Error::Invalid(format!("{}: at `{field}`: {}", path.display(), e.inner()))
    })
}

fn from_value<T: DeserializeOwned>(v: Value, what: &str) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| Error::Invalid(format!("{what}: at `{}`: {}", e.path(), e.inner())))
}

/// A tensor read from JSON: a product triple or a bare Kelvin matrix.
#[derive(Debug, Clone)]
pub enum TensorInput {
    Triple(LieTriple),
    Matrix(KelvinMatrix),
}

impl TensorInput {
    pub fn from_json(v: Value, what: &str) -> Result<Self> {
        if v.get("rows").is_some() {
            Ok(TensorInput::Matrix(from_value(v, what)?))
        } else {
            Ok(TensorInput::Triple(from_value(v, what)?))
        }
    }

    pub fn kelvin(&self) -> Result<KelvinMatrix> {
        match self {
            TensorInput::Triple(t) => t.to_kelvin(),
            TensorInput::Matrix(m) => Ok(m.clone()),
        }
    }

    /// Product representation. A bare matrix is taken to be in the canonical
    /// frame of `class` (`Q = I`); it must pass the class check at `tol`.
    pub fn triple(&self, class: Option<SymmetryClass>, tol: f64, reference: Option<&LieTriple>) -> Result<LieTriple> {
        match self {
            TensorInput::Triple(t) => Ok(t.clone()),
            TensorInput::Matrix(m) => {
                let class = class.ok_or_else(|| {
                    Error::Invalid("bare Kelvin matrices need --class for the product metric".into())
                })?;
                let r = check_reduced_form(m, class, tol)?;
                if !r.passed {
                    return Err(Error::Invalid(format!(
                        "matrix is not in the canonical {class} form (violation {:.3e})",
                        r.max_violation
                    )));
                }
                LieTriple::from_kelvin(m, DMatrix::identity(m.spatial_dim(), m.spatial_dim()), reference)
            }
        }
    }
}

fn read_tensor(path: &Path) -> Result<TensorInput> {
    let v: Value = read_json(path)?;
    TensorInput::from_json(v, &path.display().to_string())
}

fn weights(g: &Global) -> Result<MetricWeights> {
    MetricWeights::new(g.cv, g.ct)
}

/// One row per class: name, d, k, m_Q, m_V, m_Λ, n, Hasse parents.
pub fn classes_table() -> Vec<Value> {
    SymmetryClass::ALL
        .iter()
        .map(|&c| {
            let s = class_spec(c);
            json!({
                "class": c.name(),
                "dim": c.dim(),
                "kelvin_dim": c.kelvin_dim(),
                "m_q": s.m_q,
                "m_v": s.m_v,
                "m_lambda": s.m_lambda,
                "n": s.n(),
                "parents": c.hasse_parents().iter().map(|p| p.name()).collect::<Vec<_>>(),
            })
        })
        .collect()
}

fn cmd_classes(g: &Global) -> Result<()> {
    let mut out = output(&g.out)?;
    match g.format {
        Format::Json => write_json(out, &classes_table()),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(["class", "dim", "kelvin_dim", "m_q", "m_v", "m_lambda", "n", "parents"])?;
            for c in SymmetryClass::ALL {
                let s = class_spec(c);
                let parents: Vec<&str> = c.hasse_parents().iter().map(|p| p.name()).collect();
                w.write_record([
                    c.name().to_string(),
                    c.dim().to_string(),
                    c.kelvin_dim().to_string(),
                    s.m_q.to_string(),
                    s.m_v.to_string(),
                    s.m_lambda.to_string(),
                    s.n().to_string(),
                    parents.join(" "),
                ])?;
            }
            w.flush()?;
            drop(w);
            out.flush()?;
            Ok(())
        }
    }
}

/// Output document of `build`.
#[derive(Debug, Serialize)]
pub struct BuildOutput {
    pub class: SymmetryClass,
    pub z: ParamVector,
    pub kelvin: KelvinMatrix,
    pub triple: LieTriple,
    pub check: crate::classes::CheckReport,
}

/// `build_full` plus the class check of the reduced form.
pub fn build_document(class: SymmetryClass, z: &ParamVector, tol: f64) -> Result<BuildOutput> {
    let (kelvin, triple) = build_full(class, z)?;
    let check = check_reduced_form(&KelvinMatrix::new(triple.reduced_matrix())?, class, tol)?;
    Ok(BuildOutput { class, z: z.clone(), kelvin, triple, check })
}

fn write_matrix_csv<W: Write>(mut out: W, c: &KelvinMatrix) -> Result<()> {
    writeln!(out, "# unit: GPa")?;
    let mut w = csv::Writer::from_writer(&mut out);
    for row in rows_of(c.matrix()) {
        w.write_record(row.iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    drop(w);
    out.flush()?;
    Ok(())
}

fn cmd_build(g: &Global, a: &BuildArgs) -> Result<()> {
    let (class, z) = match &a.config {
        Some(path) => {
            let cfg: GenConfig = read_json(path)?;
            if let Some(c) = g.class {
                if c != cfg.class {
                    return Err(Error::Invalid(format!("--class {c} conflicts with config class {}", cfg.class)));
                }
            }
            (cfg.class, cfg.z0)
        }
        None => {
            let class = g.class.ok_or_else(|| Error::Invalid("build needs --config or --class".into()))?;
            let deg = |v: &[f64]| v.iter().map(|x| x.to_radians()).collect::<Vec<_>>();
            (class, ParamVector::new(deg(&a.q), deg(&a.p), a.mu.clone()))
        }
    };
    let doc = build_document(class, &z, g.tol)?;
    let out = output(&g.out)?;
    match g.format {
        Format::Json => write_json(out, &doc),
        Format::Csv => write_matrix_csv(out, &doc.kelvin),
    }
}

fn cmd_sample(g: &Global, a: &SampleArgs) -> Result<()> {
    let mut cfg: GenConfig = read_json(&a.config)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(c) = g.class {
        if c != cfg.class {
            return Err(Error::Invalid(format!("--class {c} conflicts with config class {}", cfg.class)));
        }
    }
    let batch = random_kelvin(&cfg, a.count)?;
    let mut out = output(&g.out)?;
    match g.format {
        Format::Json => batch.write_jsonl(&mut out)?,
        Format::Csv => batch.write_csv(&mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn endpoint_triples(g: &Global, from: &Path, to: &Path) -> Result<(LieTriple, LieTriple)> {
    let a = read_tensor(from)?;
    let b = read_tensor(to)?;
    let ta = a.triple(g.class, g.tol, None)?;
    let tb = b.triple(g.class, g.tol, Some(&ta))?;
    Ok((ta, tb))
}

/// Triples for any metric; non-product metrics accept bare matrices without a class.
fn path_endpoints(g: &Global, from: &Path, to: &Path) -> Result<(LieTriple, LieTriple)> {
    if MetricKind::from(g.metric) == MetricKind::Product {
        return endpoint_triples(g, from, to);
    }
    let as_triple = |t: TensorInput| -> Result<LieTriple> {
        let c = t.kelvin()?;
        let d = c.spatial_dim();
        LieTriple::from_kelvin(&c, DMatrix::identity(d, d), None)
    };
    Ok((as_triple(read_tensor(from)?)?, as_triple(read_tensor(to)?)?))
}

fn cmd_interpolate(g: &Global, a: &InterpolateArgs) -> Result<()> {
    let (ta, tb) = path_endpoints(g, &a.from, &a.to)?;
    let path = InterpolationPath::uniform(&ta, &tb, g.metric.into(), a.n)?;
    let mut out = output(&g.out)?;
    match g.format {
        Format::Csv => path.write_csv(&mut out)?,
        Format::Json => {
            let samples: Vec<Value> = path
                .samples
                .iter()
                .map(|(t, c)| json!({ "t": t, "det": c.det(), "kelvin": c }))
                .collect();
            write_json(&mut out, &json!({ "metric": path.kind, "samples": samples }))?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MeanFile {
    Weighted { items: Vec<Value>, weights: Option<Vec<f64>> },
    Bare(Vec<Value>),
}

/// Mean of the tensors in a JSON document under the global metric flags.
pub fn mean_of_json(g: &Global, doc: Value, max_iter: usize) -> Result<MeanResult> {
    let (items, w) = match from_value::<MeanFile>(doc, "mean input")? {
        MeanFile::Weighted { items, weights } => (items, weights),
        MeanFile::Bare(items) => (items, None),
    };
    let tensors = items
        .into_iter()
        .enumerate()
        .map(|(i, v)| TensorInput::from_json(v, &format!("items[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    let n = tensors.len();
    let w = w.unwrap_or_else(|| vec![1.0; n]);
    match MetricKind::from(g.metric) {
        MetricKind::Product => {
            let mut triples: Vec<LieTriple> = Vec::with_capacity(n);
            for t in &tensors {
                let tr = t.triple(g.class, g.tol, triples.first())?;
                triples.push(tr);
            }
            let e = WeightedEnsemble::normalized(triples, w)?;
            mean_product(&e, &weights(g)?, &KarcherOptions { max_iter, ..Default::default() })
        }
        kind => {
            let ms = tensors.iter().map(|t| t.kelvin()).collect::<Result<Vec<_>>>()?;
            let e = WeightedEnsemble::normalized(ms, w)?;
            if kind == MetricKind::Euclid {
                mean_euclid(&e)
            } else {
                mean_log_euclid(&e)
            }
        }
    }
}

fn cmd_mean(g: &Global, a: &MeanArgs) -> Result<()> {
    let doc: Value = read_json(&a.input)?;
    let r = mean_of_json(g, doc, a.max_iter)?;
    let out = output(&g.out)?;
    match g.format {
        Format::Json => write_json(out, &r),
        Format::Csv => write_matrix_csv(out, &r.mean),
    }
}

/// Concatenated field CSV with a leading realization column.
pub fn write_fields_csv<W: Write>(fields: &[FieldSample], mut out: W) -> Result<()> {
    writeln!(out, "# unit: GPa")?;
    let k = fields.first().and_then(|f| f.points.first()).map_or(6, |p| p.kelvin.dim());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["realization".to_string(), "x".to_string(), "det".to_string()];
    header.extend((1..=k).map(|i| format!("lambda{i}")));
    header.extend(upper_triangle_names(k));
    w.write_record(&header)?;
    for f in fields {
        for p in &f.points {
            let mut ev: Vec<f64> = p.kelvin.eigenvalues().iter().copied().collect();
            ev.sort_by(|a, b| b.total_cmp(a));
            let mut row = vec![f.index.to_string(), p.x.to_string(), p.kelvin.det().to_string()];
            row.extend(ev.iter().map(|x| x.to_string()));
            row.extend(upper_triangle(p.kelvin.matrix()).iter().map(|x| x.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_field(g: &Global, a: &FieldArgs) -> Result<()> {
    let fields = match (&a.config, &a.from, &a.to) {
        (Some(path), _, _) => {
            let mut cfg: FieldConfig = read_json(path)?;
            if let Some(s) = g.seed {
                cfg.seed = s;
            }
            sample_random_field(&cfg, a.count)?
        }
        (None, Some(from), Some(to)) => {
            let (ta, tb) = path_endpoints(g, from, to)?;
            vec![interpolate_field(&ta, &tb, &Grid1D::uniform(a.grid_n)?, g.metric.into())?]
        }
        _ => return Err(Error::Invalid("field needs --config or both --from and --to".into())),
    };
    let mut out = output(&g.out)?;
    match g.format {
        Format::Csv => write_fields_csv(&fields, &mut out)?,
        Format::Json => {
            for f in &fields {
                f.write_jsonl(&mut out)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Young's modulus over an equiangular grid: rows `(θ, φ, Y)` with angles in radians.
pub fn young_surface(c: &KelvinMatrix, n_theta: usize, n_phi: usize) -> Result<Vec<(f64, f64, f64)>> {
    if c.dim() != 6 {
        return Err(Error::Invalid("Young's modulus surfaces need a 3D (6×6) Kelvin matrix".into()));
    }
    if n_theta < 2 || n_phi < 2 {
        return Err(Error::Invalid("grid needs at least 2 points per angle".into()));
    }
    let mut rows = Vec::with_capacity(n_theta * n_phi);
    for i in 0..n_theta {
        let theta = std::f64::consts::PI * i as f64 / (n_theta - 1) as f64;
        for j in 0..n_phi {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / (n_phi - 1) as f64;
            rows.push((theta, phi, directional_young_modulus(c, &Direction::from_angles(theta, phi))?));
        }
    }
    Ok(rows)
}

fn cmd_ymod(g: &Global, a: &YmodArgs) -> Result<()> {
    let c = match &a.input {
        Some(p) => read_tensor(p)?.kelvin()?,
        None => orthotropic_kelvin(&OrthotropicConstants::cortical_bone())?,
    };
    let rows = young_surface(&c, a.n_theta, a.n_phi)?;
    let mut out = output(&g.out)?;
    match g.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(["theta_deg", "phi_deg", "young_gpa"])?;
            for (t, p, y) in &rows {
                w.write_record([t.to_degrees().to_string(), p.to_degrees().to_string(), y.to_string()])?;
            }
            w.flush()?;
        }
        Format::Json => {
            let v: Vec<Value> =
                rows.iter().map(|(t, p, y)| json!({ "theta": t, "phi": p, "young_gpa": y })).collect();
            write_json(&mut out, &v)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Determinant statistics of one interpolation trace.
#[derive(Debug, Clone, Serialize)]
pub struct TraceSummary {
    pub name: String,
    pub metric: MetricKind,
    pub det_start: f64,
    pub det_end: f64,
    /// `max_i |det(x_i) − det(0)| / det(0)`.
    pub max_rel_det_change: f64,
    pub max_interior_det: f64,
    /// Interior determinant above both endpoints by more than 1e-6 relative.
    pub swelling: bool,
}

impl TraceSummary {
    pub fn new(name: &str, metric: MetricKind, field: &FieldSample) -> Self {
        let d = field.dets();
        let (d0, d1) = (d[0], d[d.len() - 1]);
        let max_rel = d.iter().map(|x| (x - d0).abs() / d0).fold(0.0, f64::max);
        let max_int = d[1..d.len() - 1].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            name: name.to_string(),
            metric,
            det_start: d0,
            det_end: d1,
            max_rel_det_change: max_rel,
            max_interior_det: max_int,
            swelling: max_int > d0.max(d1) * (1.0 + 1e-6),
        }
    }
}

/// Endpoints and traces of the bone demo.
#[derive(Debug, Clone)]
pub struct BoneDemo {
    pub a: LieTriple,
    /// `(name, end triple)` for scaling, rotation and eigen-strain variation.
    pub endpoints: Vec<(String, LieTriple)>,
    pub young: [f64; 3],
    pub traces: Vec<(TraceSummary, FieldSample)>,
}

/// Cortical bone stiffness `A` and the three endpoint variations.
///
/// * scaling: the two smallest Kelvin moduli multiplied by 5;
/// * rotation: `B = T(Q)ᵀ A T(Q)` with `Q` a 60° turn about axis 2;
/// * eigen-strain: the normal-strain block of `V` turned by the same rotation.
pub fn bone_endpoints() -> Result<(LieTriple, Vec<(String, LieTriple)>)> {
    let c = orthotropic_kelvin(&OrthotropicConstants::cortical_bone())?;
    let a = LieTriple::from_kelvin(&c, DMatrix::identity(3, 3), None)?;
    let mut scaled = a.clone();
    scaled.lambda[4] *= 5.0;
    scaled.lambda[5] *= 5.0;
    let r = exp_so3(&[0.0, std::f64::consts::FRAC_PI_3, 0.0]);
    let rotated = LieTriple::new(r.clone(), a.v.clone(), a.lambda.clone())?;
    let strained = LieTriple::new(a.q.clone(), block_diag(&r, &DMatrix::identity(3, 3)) * &a.v, a.lambda.clone())?;
    Ok((a, vec![("scaling".into(), scaled), ("rotation".into(), rotated), ("eigenstrain".into(), strained)]))
}

pub fn bone_demo(grid_n: usize) -> Result<BoneDemo> {
    let (a, endpoints) = bone_endpoints()?;
    let c = a.to_kelvin()?;
    let mut young = [0.0; 3];
    for (i, y) in young.iter_mut().enumerate() {
        *y = directional_young_modulus(&c, &Direction::axis(i))?;
    }
    let grid = Grid1D::uniform(grid_n)?;
    let mut traces = Vec::new();
    for (name, b) in &endpoints {
        for kind in [MetricKind::Euclid, MetricKind::Product] {
            let f = interpolate_field(&a, b, &grid, kind)?;
            traces.push((TraceSummary::new(name, kind, &f), f));
        }
    }
    Ok(BoneDemo { a, endpoints, young, traces })
}

fn cmd_bone_demo(g: &Global, a: &BoneArgs) -> Result<()> {
    let dir = g.out.clone().unwrap_or_else(|| PathBuf::from("bone_demo"));
    fs::create_dir_all(&dir)?;
    let demo = bone_demo(a.grid_n)?;
    for (s, f) in &demo.traces {
        let file = File::create(dir.join(format!("{}_{}.csv", s.name, s.metric)))?;
        let mut w = BufWriter::new(file);
        f.write_csv(&mut w)?;
        w.flush()?;
    }
    let summary = json!({
        "young_gpa": { "axis1": demo.young[0], "axis2": demo.young[1], "axis3": demo.young[2] },
        "stiffness": demo.a.to_kelvin()?,
        "traces": demo.traces.iter().map(|(s, _)| s).collect::<Vec<_>>(),
    });
    write_json(BufWriter::new(File::create(dir.join("summary.json"))?), &summary)
}
