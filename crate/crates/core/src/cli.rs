//! Command-line front end.
//!
//! [`run`] parses arguments, runs one subcommand inside a rayon pool sized by
//! `--threads` (or `LATENTGEOM_THREADS`), and maps the outcome to an exit
//! code. All randomness comes from `--seed`.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::checks::{validate_network, ValidateConfig};
use crate::deviation::{traversal_deviation, DeviationPoint, ProjectionOptions};
use crate::evaluation::{
    direction_grid, eps_sweep, robustness_suite, subspace_grid, sv_histogram, warpage_suite, ExperimentReport,
    GridPoint, RobustnessConfig, RobustnessMethod, WarpageConfig,
};
use crate::gen::{self, GenConfig, Init};
use crate::global_basis::{ganspace_basis, sefa_basis};
use crate::io::{load_network, load_vector_set, save_network, FrameFile};
use crate::local_basis::local_basis;
use crate::network::MappingNetwork;
use crate::rng::{gaussian_vector, rng_from};
use crate::traversal::{
    guided_iterative_traverse, iterative_traverse, iterative_traverse_both, linear_traverse, SimilarityTarget,
    StepSizePolicy, TraversalPath,
};
use crate::{Error, Result, Vector};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
/// `validate` ran but at least one check failed.
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "latentgeom",
    version,
    about = "Local Basis, curve traversal and Grassmannian warpage for piecewise-affine mapping networks"
)]
pub struct Cli {
    /// Worker threads for parallel sections; 0 uses every core.
    #[arg(long, global = true, env = "LATENTGEOM_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random leaky-ReLU network and write it as JSON.
    GenNet(GenNetArgs),
    /// Local Basis (Jacobian SVD) at one latent point.
    Basis(BasisArgs),
    /// Linear or iterative traversal from one latent point.
    Traverse(TraverseArgs),
    /// Off-manifold residuals of a saved traversal, or of the method comparison suite.
    Deviation(DeviationArgs),
    /// Grassmannian distances between local and reference subspaces.
    Warpage(WarpageArgs),
    /// Close-pair distances as a function of the latent offset.
    EpsSweep(EpsSweepArgs),
    /// Histogram of Jacobian singular values against a matched Gaussian baseline.
    SvHist(SvHistArgs),
    /// 2-D mesh of points in the intermediate space spanned by two directions.
    Grid(GridArgs),
    /// Run the numerical self-checks against a network.
    Validate(ValidateArgs),
    /// Write a global basis in the vector-set format read by --guide-file.
    GlobalBasis(GlobalBasisArgs),
}

#[derive(Args, Debug)]
struct NetArg {
    /// Network weight file (JSON).
    #[arg(long)]
    net: PathBuf,
}

#[derive(Args, Debug)]
struct PointArgs {
    /// Latent point as comma-separated values; sampled from N(0, I) when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    z: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InitArg {
    GaussianScaled,
    Orthogonal,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    /// 16 -> 32, eight leaky-ReLU layers, slope 0.2.
    Curved,
    /// 32 -> 32, eight leaky-ReLU layers, slope 0.2.
    Square,
    /// Curved widths with slope 1.
    Affine,
}

#[derive(Args, Debug)]
struct GenNetArgs {
    /// Layer widths, input first: e.g. 16,32,32.
    #[arg(long, value_delimiter = ',', required_unless_present = "preset", conflicts_with = "preset")]
    dims: Option<Vec<usize>>,
    /// Reference width profile; fixes dims and slope.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Leaky-ReLU negative slope in (0, 1].
    #[arg(long, default_value_t = gen::CURVED_SLOPE, conflicts_with = "preset")]
    slope: f64,
    #[arg(long, value_enum, default_value_t = InitArg::GaussianScaled)]
    init: InitArg,
    #[arg(long, default_value_t = gen::DEFAULT_BIAS_STD)]
    bias_std: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BasisArgs {
    #[command(flatten)]
    net: NetArg,
    #[command(flatten)]
    point: PointArgs,
    /// Include both singular-vector sets in the output.
    #[arg(long)]
    vectors: bool,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Linear,
    Iterative,
    Guided,
    Stochastic,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TargetArg {
    /// Compare with the guide at every step.
    Global,
    /// Compare with the guide once, then with the previous direction.
    Previous,
}

#[derive(Args, Debug)]
struct TraverseArgs {
    #[command(flatten)]
    net: NetArg,
    #[command(flatten)]
    point: PointArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Iterative)]
    mode: ModeArg,
    /// One-based Local Basis index (linear and iterative modes).
    #[arg(long, default_value_t = 1)]
    direction: usize,
    /// Total length in the intermediate space.
    #[arg(long, default_value_t = 4.0)]
    intensity: f64,
    /// Pieces (iterative modes) or intervals (linear mode).
    #[arg(long, default_value_t = 40)]
    steps: usize,
    /// Traverse the reversed direction.
    #[arg(long)]
    negative: bool,
    /// Iterative mode: both branches, negative end first.
    #[arg(long, conflicts_with = "negative")]
    both: bool,
    /// Vector-set file holding the guide direction (guided modes).
    #[arg(long)]
    guide_file: Option<PathBuf>,
    /// One-based index of the guide within --guide-file.
    #[arg(long, default_value_t = 1)]
    guide_index: usize,
    #[arg(long, value_enum, default_value_t = TargetArg::Global)]
    target: TargetArg,
    /// Stochastic mode: smallest piece length.
    #[arg(long, default_value_t = 0.05)]
    step_lo: f64,
    /// Stochastic mode: largest piece length.
    #[arg(long, default_value_t = 0.15)]
    step_hi: f64,
    /// Path file (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Per-step table (CSV).
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Iterative,
    LocalLinear,
    GanspaceLinear,
    SefaLinear,
}

impl From<MethodArg> for RobustnessMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Iterative => RobustnessMethod::Iterative,
            MethodArg::LocalLinear => RobustnessMethod::LocalLinear,
            MethodArg::GanspaceLinear => RobustnessMethod::GanspaceLinear,
            MethodArg::SefaLinear => RobustnessMethod::SefaLinear,
        }
    }
}

#[derive(Args, Debug)]
struct DeviationArgs {
    #[command(flatten)]
    net: NetArg,
    /// Path file written by `traverse`; runs the method comparison when absent.
    #[arg(long)]
    from: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    direction: usize,
    #[arg(long, default_value_t = 12.0)]
    intensity: f64,
    /// Evenly spaced measurement points per traversal, endpoints included.
    #[arg(long, default_value_t = 7)]
    points: usize,
    /// Pieces of the iterative traversal.
    #[arg(long, default_value_t = 120)]
    steps: usize,
    #[arg(long, default_value_t = 20)]
    traversals: usize,
    /// Random initializations per point, on top of the known latent code.
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long, default_value_t = 10_000)]
    ganspace_samples: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MethodArg::Iterative, MethodArg::LocalLinear, MethodArg::GanspaceLinear, MethodArg::SefaLinear])]
    methods: Vec<MethodArg>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-point residual table; stdout when absent.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Summary report (comparison mode only).
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportOut {
    /// Table output; stdout when neither --csv nor --json is given.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct WarpageArgs {
    #[command(flatten)]
    net: NetArg,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 4, 8, 10])]
    k: Vec<usize>,
    /// Pairs for the latent-point settings.
    #[arg(long, default_value_t = 1000)]
    pairs: usize,
    /// Pairs for the random orthogonal baseline.
    #[arg(long, default_value_t = 100)]
    pairs_random: usize,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 10_000)]
    ganspace_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: ReportOut,
}

#[derive(Args, Debug)]
struct EpsSweepArgs {
    #[command(flatten)]
    net: NetArg,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.02, 0.05, 0.1, 0.2, 0.5])]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: ReportOut,
}

#[derive(Args, Debug)]
struct SvHistArgs {
    #[command(flatten)]
    net: NetArg,
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[arg(long, default_value_t = 50)]
    bins: usize,
    /// Threshold, relative to the median, for the small-value fractions.
    #[arg(long, default_value_t = 0.1)]
    rel: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: ReportOut,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[command(flatten)]
    net: NetArg,
    #[command(flatten)]
    point: PointArgs,
    /// One-based Local Basis indices spanning the mesh.
    #[arg(long, default_value_t = 1)]
    i: usize,
    #[arg(long, default_value_t = 2)]
    j: usize,
    /// Use two random orthonormal directions instead of Local Basis vectors.
    #[arg(long)]
    random_directions: bool,
    #[arg(long, default_value_t = 12.0)]
    half_extent: f64,
    /// Mesh points per half axis; the mesh has (2n+1)^2 points.
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Also compute off-manifold residuals with this many random restarts.
    #[arg(long)]
    restarts: Option<usize>,
    #[command(flatten)]
    out: ReportOut,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    net: NetArg,
    #[arg(long, default_value_t = 10)]
    points: usize,
    #[arg(long, default_value_t = 50)]
    pca_samples_per_dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Check outcomes as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GlobalArg {
    Ganspace,
    Sefa,
}

#[derive(Args, Debug)]
struct GlobalBasisArgs {
    #[command(flatten)]
    net: NetArg,
    #[arg(long, value_enum, default_value_t = GlobalArg::Ganspace)]
    method: GlobalArg,
    /// Gaussian samples for the sampled-PCA basis.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_ERROR;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            EXIT_ERROR
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::GenNet(a) => cmd_gen_net(a),
        Command::Basis(a) => cmd_basis(a),
        Command::Traverse(a) => cmd_traverse(a),
        Command::Deviation(a) => cmd_deviation(a),
        Command::Warpage(a) => cmd_warpage(a),
        Command::EpsSweep(a) => cmd_eps_sweep(a),
        Command::SvHist(a) => cmd_sv_hist(a),
        Command::Grid(a) => cmd_grid(a),
        Command::Validate(a) => cmd_validate(a),
        Command::GlobalBasis(a) => cmd_global_basis(a),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(io::Error::new(e.kind(), format!("cannot write {}: {e}", path.display()))))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn csv_bytes<F>(fill: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> Result<()>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        fill(&mut w)?;
        w.flush()?;
    }
    Ok(buf)
}

/// Writes CSV to `path`, or to stdout when `path` is `None`.
fn emit_csv(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes)
            .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("cannot write {}: {e}", p.display())))),
        None => {
            io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn emit_report(report: &ExperimentReport, out: &ReportOut) -> Result<()> {
    let mut bytes = Vec::new();
    report.write_csv(&mut bytes)?;
    if out.csv.is_some() || out.json.is_none() {
        emit_csv(out.csv.as_deref(), &bytes)?;
    }
    if let Some(p) = &out.json {
        write_text(p, &(report.to_json() + "\n"))?;
    }
    Ok(())
}

fn load_net(arg: &NetArg) -> Result<MappingNetwork> {
    load_network(&arg.net)
}

/// The requested latent point, or a Gaussian draw from the seed; moved off a
/// partition boundary if it sits on one.
fn latent_point(net: &MappingNetwork, point: &PointArgs) -> Result<Vector> {
    let mut rng = rng_from(point.seed, &[0xc11]);
    let z = match &point.z {
        Some(values) => {
            if values.len() != net.in_dim() {
                return Err(Error::shape("--z", net.in_dim(), values.len()));
            }
            Vector::from_column_slice(values)
        }
        None => gaussian_vector(&mut rng, net.in_dim()),
    };
    let moved = net.nudge_off_boundary(&z, &mut rng)?;
    if moved != z {
        log::warn!("latent point was on a partition boundary; moved by at most 1e-6");
    }
    Ok(moved)
}

fn cmd_gen_net(a: GenNetArgs) -> Result<i32> {
    let init = match a.init {
        InitArg::GaussianScaled => Init::GaussianScaled,
        InitArg::Orthogonal => Init::Orthogonal,
    };
    let (dims, slope) = match a.preset {
        Some(Preset::Curved) => (gen::CURVED_DIMS.to_vec(), gen::CURVED_SLOPE),
        Some(Preset::Square) => (gen::SQUARE_DIMS.to_vec(), gen::CURVED_SLOPE),
        Some(Preset::Affine) => (gen::CURVED_DIMS.to_vec(), 1.0),
        None => (a.dims.unwrap_or_default(), a.slope),
    };
    let mut cfg = GenConfig::new(dims, slope, a.seed, init);
    cfg.bias_std = a.bias_std;
    let net = gen::generate_network(&cfg)?;
    save_network(&net, &a.out)?;
    Ok(EXIT_OK)
}

fn cmd_basis(a: BasisArgs) -> Result<i32> {
    let net = load_net(&a.net)?;
    let z = latent_point(&net, &a.point)?;
    let frame = local_basis(&net, &z)?;
    let text = serde_json::to_string_pretty(&FrameFile::from_frame(&frame, a.vectors))? + "\n";
    match &a.out {
        Some(p) => write_text(p, &text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(EXIT_OK)
}

/// Traversal file written by `traverse` and read by `deviation --from`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFile {
    pub mode: String,
    pub intensity: f64,
    /// Starting direction index (linear and iterative modes).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<usize>,
    pub points: Vec<PathPoint>,
    /// Set when an iterative traversal stopped early; `points` holds the
    /// completed part.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub step: usize,
    /// Signed length travelled from the start.
    pub t: f64,
    pub z: Vec<f64>,
    /// The traversed point. For linear mode this is on the straight line and
    /// generally off the manifold.
    pub w: Vec<f64>,
    /// `f(z)` when it differs from `w` (linear mode).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pushforward: Option<Vec<f64>>,
}

#[derive(Debug, Serialize)]
struct StepRow {
    step: usize,
    t: f64,
    chord_length: f64,
    step_length: f64,
    cosine_to_previous: Option<f64>,
    target_cosine: Option<f64>,
    sigma: f64,
    direction_index: usize,
}

fn path_to_file(path: &TraversalPath, mode: &str, direction: Option<usize>, t_sign: f64) -> (PathFile, Vec<StepRow>) {
    let mut points = Vec::with_capacity(path.iterates.len());
    let mut rows = Vec::new();
    let chords = path.chord_lengths();
    let cosines = path.consecutive_cosines();
    let mut t = 0.0;
    let mut dep_index = 0;
    for (n, it) in path.iterates.iter().enumerate() {
        points.push(PathPoint {
            step: n,
            t: t_sign * t,
            z: it.z.clone(),
            w: it.w.clone(),
            pushforward: None,
        });
        if let Some(dep) = &it.departure {
            rows.push(StepRow {
                step: n,
                t: t_sign * t,
                chord_length: chords[n],
                step_length: dep.step_length,
                cosine_to_previous: cosines[dep_index],
                target_cosine: dep.cosine,
                sigma: dep.sigma,
                direction_index: dep.direction_index,
            });
            dep_index += 1;
            t += dep.step_length;
        }
    }
    (
        PathFile {
            mode: mode.to_string(),
            intensity: path.intensity,
            direction,
            points,
            aborted: None,
        },
        rows,
    )
}

fn cmd_traverse(a: TraverseArgs) -> Result<i32> {
    let net = load_net(&a.net)?;
    let z0 = latent_point(&net, &a.point)?;
    let sign = if a.negative { -1 } else { 1 };
    let t_sign = f64::from(sign);

    let guide = || -> Result<Vector> {
        let file = a
            .guide_file
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("guided modes need --guide-file".into()))?;
        let set = load_vector_set(file)?;
        if a.guide_index == 0 {
            return Err(Error::InvalidArgument("--guide-index is one-based".into()));
        }
        Ok(set.vector(a.guide_index - 1)? * t_sign)
    };
    let target = match a.target {
        TargetArg::Global => SimilarityTarget::GlobalEveryStep,
        TargetArg::Previous => SimilarityTarget::PreviousDirection,
    };

    let result = match a.mode {
        ModeArg::Linear => {
            let frame = local_basis(&net, &z0)?;
            let lin = linear_traverse(&net, &frame, a.direction, t_sign * a.intensity, a.steps + 1)?;
            let sigma = frame.sigma(a.direction - 1);
            let mut points = Vec::with_capacity(lin.t.len());
            let mut rows = Vec::new();
            for i in 0..lin.t.len() {
                points.push(PathPoint {
                    step: i,
                    t: lin.t[i],
                    z: lin.z_points[i].clone(),
                    w: lin.w_line[i].clone(),
                    pushforward: Some(lin.pushforward[i].clone()),
                });
                if i + 1 < lin.t.len() {
                    let chord = lin.w_line[i]
                        .iter()
                        .zip(&lin.w_line[i + 1])
                        .map(|(p, q)| (q - p).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    rows.push(StepRow {
                        step: i,
                        t: lin.t[i],
                        chord_length: chord,
                        step_length: (lin.t[i + 1] - lin.t[i]).abs(),
                        cosine_to_previous: (i > 0).then_some(1.0),
                        target_cosine: None,
                        sigma,
                        direction_index: a.direction,
                    });
                }
            }
            let file = PathFile {
                mode: "linear".into(),
                intensity: a.intensity,
                direction: Some(a.direction),
                points,
                aborted: None,
            };
            Ok((file, rows))
        }
        ModeArg::Iterative => {
            let path = if a.both {
                iterative_traverse_both(&net, &z0, a.direction, a.intensity, a.steps)
            } else {
                iterative_traverse(&net, &z0, a.direction, a.intensity, a.steps, sign)
            };
            path.map(|p| {
                let (mut file, rows) = path_to_file(&p, "iterative", Some(a.direction), t_sign);
                if a.both {
                    // the concatenated path starts at the far negative end
                    for pt in &mut file.points {
                        pt.t -= a.intensity;
                    }
                }
                (file, rows)
            })
        }
        ModeArg::Guided | ModeArg::Stochastic => {
            let policy = if a.mode == ModeArg::Guided {
                StepSizePolicy::Fixed
            } else {
                StepSizePolicy::UniformRandom {
                    lo: a.step_lo,
                    hi: a.step_hi,
                    seed: a.point.seed,
                }
            };
            let mode = if a.mode == ModeArg::Guided { "guided" } else { "stochastic" };
            guided_iterative_traverse(&net, &z0, &guide()?, a.intensity, a.steps, policy, target)
                .map(|p| path_to_file(&p, mode, None, 1.0))
        }
    };

    let (file, rows, failure) = match result {
        Ok((file, rows)) => (file, rows, None),
        Err(Error::TraversalAborted {
            partial,
            planned_steps,
            source,
        }) => {
            let mode = match a.mode {
                ModeArg::Iterative => "iterative",
                ModeArg::Guided => "guided",
                _ => "stochastic",
            };
            let (mut file, rows) = path_to_file(&partial, mode, Some(a.direction), t_sign);
            let msg = format!(
                "stopped after {} of {planned_steps} steps: {source}",
                partial.n_steps_taken()
            );
            file.aborted = Some(msg.clone());
            (file, rows, Some(msg))
        }
        Err(e) => return Err(e),
    };
    write_json(&a.out, &file)?;
    if let Some(p) = &a.csv {
        let bytes = csv_bytes(|w| {
            for r in &rows {
                w.serialize(r)?;
            }
            Ok(())
        })?;
        emit_csv(Some(p), &bytes)?;
    }
    if let Some(msg) = failure {
        eprintln!("error: traversal {msg}; partial path written");
        return Ok(EXIT_ERROR);
    }
    Ok(EXIT_OK)
}

fn cmd_deviation(a: DeviationArgs) -> Result<i32> {
    let net = load_net(&a.net)?;
    let opts = ProjectionOptions::default();
    if let Some(from) = &a.from {
        let text = fs::read_to_string(from)
            .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("cannot read {}: {e}", from.display()))))?;
        let file: PathFile = serde_json::from_str(&text)?;
        let points: Vec<DeviationPoint> = file
            .points
            .iter()
            .map(|p| {
                if p.w.len() != net.out_dim() || p.z.len() != net.in_dim() {
                    return Err(Error::InvalidArgument(format!(
                        "points[{}]: dimensions do not match the network",
                        p.step
                    )));
                }
                Ok(DeviationPoint {
                    w: Vector::from_column_slice(&p.w),
                    known_z: Some(Vector::from_column_slice(&p.z)),
                })
            })
            .collect::<Result<_>>()?;
        let residuals = traversal_deviation(&net, &points, a.restarts, a.seed, &opts)?;
        #[derive(Serialize)]
        struct Row {
            point: usize,
            intensity: f64,
            residual_upper_bound: f64,
            converged: bool,
        }
        let bytes = csv_bytes(|w| {
            for (p, r) in file.points.iter().zip(&residuals) {
                w.serialize(Row {
                    point: p.step,
                    intensity: p.t,
                    residual_upper_bound: r.residual,
                    converged: r.converged,
                })?;
            }
            Ok(())
        })?;
        emit_csv(a.csv.as_deref(), &bytes)?;
        return Ok(EXIT_OK);
    }

    let cfg = RobustnessConfig {
        direction: a.direction,
        intensity: a.intensity,
        n_points: a.points,
        iterative_steps: a.steps,
        n_traversals: a.traversals,
        restarts: a.restarts,
        seed: a.seed,
        ganspace_samples: a.ganspace_samples,
        methods: a.methods.iter().map(|&m| m.into()).collect(),
    };
    let (report, records) = robustness_suite(&net, &cfg)?;
    #[derive(Serialize)]
    struct Row<'a> {
        method: &'a str,
        traversal: usize,
        point: usize,
        intensity: f64,
        residual_upper_bound: f64,
        converged: bool,
    }
    let bytes = csv_bytes(|w| {
        for r in &records {
            w.serialize(Row {
                method: &r.method,
                traversal: r.traversal,
                point: r.point,
                intensity: r.intensity,
                residual_upper_bound: r.residual,
                converged: r.converged,
            })?;
        }
        Ok(())
    })?;
    emit_csv(a.csv.as_deref(), &bytes)?;
    if let Some(p) = &a.json {
        write_text(p, &(report.to_json() + "\n"))?;
    }
    Ok(EXIT_OK)
}

fn cmd_warpage(a: WarpageArgs) -> Result<i32> {
    let net = load_net(&a.net)?;
    let cfg = WarpageConfig {
        k_values: a.k,
        n_pairs: a.pairs,
        n_pairs_random: a.pairs_random,
        eps: a.eps,
        seed: a.seed,
        ganspace_samples: a.ganspace_samples,
    };
    emit_report(&warpage_suite(&net, &cfg)?, &a.out)?;
    Ok(EXIT_OK)
}

fn cmd_eps_sweep(a: EpsSweepArgs) -> Result<i32> {
    let net = load_net(&a.net)?;
    emit_report(&eps_sweep(&net, a.k, &a.eps, a.pairs, a.seed)?, &a.out)?;
    Ok(EXIT_OK)
}

fn cmd_sv_hist(a: SvHistArgs) -> Result<i32> {
    let net = load_net(&a.net)?;
    let hist = sv_histogram(&net, a.points, a.bins, a.seed)?;
    let mut bytes = Vec::new();
    hist.write_csv(&mut bytes)?;
    if a.out.csv.is_some() || a.out.json.is_none() {
        emit_csv(a.out.csv.as_deref(), &bytes)?;
    }
    if let Some(p) = &a.out.json {
        write_json(p, &hist)?;
    }
    eprintln!(
        "fraction below {} x median: jacobian {:.4}, gaussian baseline {:.4}",
        a.rel,
        hist.jacobian_small_fraction(a.rel),
        hist.baseline_small_fraction(a.rel)
    );
    Ok(EXIT_OK)
}

fn cmd_grid(a: GridArgs) -> Result<i32> {
    let net = load_net(&a.net)?;
    let z = latent_point(&net, &a.point)?;
    let frame = local_basis(&net, &z)?;
    let grid: Vec<GridPoint> = if a.random_directions {
        let mut rng = rng_from(a.point.seed, &[0x96d]);
        let pair = crate::grassmann::random_orthogonal_frame(net.out_dim(), 2, &mut rng)?;
        let f = pair.frame();
        direction_grid(
            frame.w(),
            &f.column(0).into_owned(),
            &f.column(1).into_owned(),
            a.half_extent,
            a.n,
        )?
    } else {
        subspace_grid(&frame, a.i, a.j, a.half_extent, a.n)?
    };
    let residuals = match a.restarts {
        Some(restarts) => {
            let points: Vec<DeviationPoint> = grid
                .iter()
                .map(|g| DeviationPoint {
                    w: Vector::from_column_slice(&g.w),
                    known_z: Some(z.clone()),
                })
                .collect();
            Some(traversal_deviation(&net, &points, restarts, a.point.seed, &ProjectionOptions::default())?)
        }
        None => None,
    };

    let bytes = csv_bytes(|w| {
        let mut header = vec!["x".to_string(), "y".into(), "a".into(), "b".into()];
        if residuals.is_some() {
            header.push("residual_upper_bound".into());
        }
        header.extend((0..net.out_dim()).map(|c| format!("w{c}")));
        w.write_record(&header)?;
        for (idx, g) in grid.iter().enumerate() {
            let mut rec = vec![g.x.to_string(), g.y.to_string(), g.a.to_string(), g.b.to_string()];
            if let Some(r) = &residuals {
                rec.push(r[idx].residual.to_string());
            }
            rec.extend(g.w.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        Ok(())
    })?;
    if a.out.csv.is_some() || a.out.json.is_none() {
        emit_csv(a.out.csv.as_deref(), &bytes)?;
    }
    if let Some(p) = &a.out.json {
        #[derive(Serialize)]
        struct GridFile<'a> {
            z: Vec<f64>,
            points: &'a [GridPoint],
            #[serde(skip_serializing_if = "Option::is_none")]
            residual_upper_bounds: Option<Vec<f64>>,
        }
        write_json(
            p,
            &GridFile {
                z: z.iter().copied().collect(),
                points: &grid,
                residual_upper_bounds: residuals.map(|r| r.iter().map(|d| d.residual).collect()),
            },
        )?;
    }
    Ok(EXIT_OK)
}

fn cmd_validate(a: ValidateArgs) -> Result<i32> {
    let net = load_net(&a.net)?;
    let cfg = ValidateConfig {
        n_points: a.points,
        seed: a.seed,
        pca_samples_per_dim: a.pca_samples_per_dim,
    };
    let outcomes = validate_network(&net, &cfg)?;
    let mut stdout = io::stdout().lock();
    for o in &outcomes {
        writeln!(
            stdout,
            "{} {:<28} worst = {:.3e}  tolerance = {:.1e}  ({})",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.worst,
            o.tolerance,
            o.detail
        )?;
    }
    if let Some(p) = &a.json {
        write_json(p, &outcomes)?;
    }
    Ok(if outcomes.iter().all(|o| o.passed) {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}

fn cmd_global_basis(a: GlobalBasisArgs) -> Result<i32> {
    let net = load_net(&a.net)?;
    let basis = match a.method {
        GlobalArg::Ganspace => ganspace_basis(&net, a.samples, a.seed)?,
        GlobalArg::Sefa => sefa_basis(&net)?,
    };
    write_json(&a.out, &basis.to_vector_set())?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_and_usage_codes() {
        assert_eq!(run(["latentgeom", "--help"]), EXIT_OK);
        assert_eq!(run(["latentgeom", "no-such-command"]), EXIT_USAGE);
        assert_eq!(run(["latentgeom", "basis"]), EXIT_USAGE);
    }

    #[test]
    fn missing_file_is_runtime_error() {
        assert_eq!(run(["latentgeom", "basis", "--net", "/nonexistent/net.json"]), EXIT_ERROR);
    }
}
