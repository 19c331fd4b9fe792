//! Experiment drivers.
//!
//! Every driver takes a master seed; each pair or point draws from its own
//! stream derived from that seed and its index, so the thread count never
//! changes a result. Reports carry a snapshot of their configuration,
//! including a SHA-256 of the network's JSON form.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::deviation::{traversal_deviation, DeviationPoint, ProjectionOptions};
use crate::global_basis::{ganspace_basis, sefa_basis, GlobalBasis};
use crate::grassmann::{geodesic_metric, projection_metric, random_orthogonal_frame, Subspace};
use crate::linalg::{mean_std, median};
use crate::local_basis::{local_basis, LocalFrame};
use crate::network::MappingNetwork;
use crate::rng::{gaussian_vector, rng_from, unit_vector};
use crate::traversal::{iterative_traverse, linear_traverse, linear_w_line};
use crate::{Error, Matrix, Result, Vector};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub setting: String,
    /// Subspace dimension `k`, closeness `ε`, or intensity, depending on the
    /// experiment.
    pub param: f64,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigSnapshot {
    pub net_sha256: String,
    pub seed: u64,
    pub params: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub rows: Vec<ReportRow>,
    pub config: ConfigSnapshot,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn row(&self, setting: &str, param: f64, metric: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.setting == setting && r.param == param && r.metric == metric)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn network_hash(net: &MappingNetwork) -> String {
    let digest = Sha256::digest(crate::io::network_to_json(net).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn snapshot(net: &MappingNetwork, seed: u64, params: Vec<(&str, serde_json::Value)>) -> ConfigSnapshot {
    ConfigSnapshot {
        net_sha256: network_hash(net),
        seed,
        params: params.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
    }
}

const PROJECTION: &str = "projection";
const GEODESIC: &str = "geodesic";

/// Comparison settings of the warpage suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setting {
    RandomOrthogonal,
    RandomW,
    CloseW,
    ToGanspace,
    ToSefa,
}

impl Setting {
    pub fn name(&self) -> &'static str {
        match self {
            Setting::RandomOrthogonal => "random_od",
            Setting::RandomW => "random_w",
            Setting::CloseW => "close_w",
            Setting::ToGanspace => "to_ganspace",
            Setting::ToSefa => "to_sefa",
        }
    }

    fn stream(&self) -> u64 {
        match self {
            Setting::RandomOrthogonal => 1,
            Setting::RandomW => 2,
            Setting::CloseW => 3,
            Setting::ToGanspace => 4,
            Setting::ToSefa => 5,
        }
    }
}

/// Draws Gaussian latent points until one has a well-defined frame whose
/// top-`k_max` singular values are non-zero. Returns the frame and the number
/// of rejected draws.
fn sample_frame(net: &MappingNetwork, rng: &mut crate::rng::Rng, k_max: usize) -> Result<(LocalFrame, usize)> {
    let mut rejected = 0;
    loop {
        let z = gaussian_vector(rng, net.in_dim());
        match frame_with_rank(net, &z, k_max) {
            Ok(f) => return Ok((f, rejected)),
            Err(Error::Boundary { .. } | Error::RankDeficient { .. }) => {
                rejected += 1;
                if rejected > 1000 {
                    return Err(Error::Numerical("no valid latent point after 1000 draws".into()));
                }
            }
            Err(e) => return Err(e),
        }
    }
}

fn frame_with_rank(net: &MappingNetwork, z: &Vector, k_max: usize) -> Result<LocalFrame> {
    let frame = local_basis(net, z)?;
    frame.check_direction(k_max)?;
    Ok(frame)
}

/// Distances for one pair at every `k`: `(projection, geodesic)` per k.
type PairDistances = Vec<(f64, f64)>;

fn distances_for_ks(a: &Subspace, b: &Subspace, ks: &[usize]) -> Result<PairDistances> {
    ks.iter()
        .map(|&k| {
            let sa = Subspace::from_orthonormal(a.frame().columns(0, k).into_owned())?;
            let sb = Subspace::from_orthonormal(b.frame().columns(0, k).into_owned())?;
            Ok((projection_metric(&sa, &sb)?, geodesic_metric(&sa, &sb)?))
        })
        .collect()
}

fn aggregate(setting: &str, ks: &[f64], pairs: &[PairDistances], rows: &mut Vec<ReportRow>) {
    for (i, &k) in ks.iter().enumerate() {
        for (metric, pick) in [(PROJECTION, 0usize), (GEODESIC, 1)] {
            let values: Vec<f64> = pairs
                .iter()
                .map(|p| if pick == 0 { p[i].0 } else { p[i].1 })
                .collect();
            let (mean, std) = mean_std(&values);
            rows.push(ReportRow {
                setting: setting.to_string(),
                param: k,
                metric: metric.to_string(),
                mean,
                std,
                n_samples: values.len(),
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarpageConfig {
    pub k_values: Vec<usize>,
    /// Pairs for the latent-point settings.
    pub n_pairs: usize,
    /// Pairs for the random orthogonal baseline.
    pub n_pairs_random: usize,
    /// `|z' − z|` for the close pairs.
    pub eps: f64,
    pub seed: u64,
    /// Gaussian samples behind the sampled-PCA global basis.
    pub ganspace_samples: usize,
}

impl Default for WarpageConfig {
    fn default() -> Self {
        WarpageConfig {
            k_values: vec![1, 2, 4, 8, 10],
            n_pairs: 1000,
            n_pairs_random: 100,
            eps: 0.1,
            seed: 0,
            ganspace_samples: 10_000,
        }
    }
}

/// Grassmannian distances for the five comparison settings at each `k`.
pub fn warpage_suite(net: &MappingNetwork, cfg: &WarpageConfig) -> Result<ExperimentReport> {
    let n = net.rank_bound();
    let d = net.out_dim();
    if cfg.k_values.is_empty() {
        return Err(Error::InvalidArgument("k_values is empty".into()));
    }
    if let Some(&k) = cfg.k_values.iter().find(|&&k| k == 0 || k > n) {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={n}")));
    }
    if cfg.n_pairs == 0 || cfg.n_pairs_random == 0 {
        return Err(Error::InvalidArgument("pair counts must be at least 1".into()));
    }
    if !(cfg.eps > 0.0 && cfg.eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {}", cfg.eps)));
    }
    let ks = &cfg.k_values;
    let k_max = *ks.iter().max().expect("non-empty");
    let kf: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    let mut rows = Vec::new();
    let mut notes = Vec::new();

    let random: Vec<PairDistances> = (0..cfg.n_pairs_random)
        .into_par_iter()
        .map(|p| {
            let mut rng = rng_from(cfg.seed, &[Setting::RandomOrthogonal.stream(), p as u64]);
            let a = random_orthogonal_frame(d, k_max, &mut rng)?;
            let b = random_orthogonal_frame(d, k_max, &mut rng)?;
            distances_for_ks(&a, &b, ks)
        })
        .collect::<Result<_>>()?;
    aggregate(Setting::RandomOrthogonal.name(), &kf, &random, &mut rows);

    let random_w: Vec<(PairDistances, usize)> = (0..cfg.n_pairs)
        .into_par_iter()
        .map(|p| {
            let mut rng = rng_from(cfg.seed, &[Setting::RandomW.stream(), p as u64]);
            let (fa, ra) = sample_frame(net, &mut rng, k_max)?;
            let (fb, rb) = sample_frame(net, &mut rng, k_max)?;
            Ok((distances_for_ks(&fa.top_subspace(k_max)?, &fb.top_subspace(k_max)?, ks)?, ra + rb))
        })
        .collect::<Result<_>>()?;
    let resampled: usize = random_w.iter().map(|r| r.1).sum();
    aggregate(
        Setting::RandomW.name(),
        &kf,
        &random_w.into_iter().map(|r| r.0).collect::<Vec<_>>(),
        &mut rows,
    );
    notes.push(format!("random_w: {resampled} latent draws resampled"));

    let close: Vec<(PairDistances, usize)> = (0..cfg.n_pairs)
        .into_par_iter()
        .map(|p| {
            let mut rng = rng_from(cfg.seed, &[Setting::CloseW.stream(), p as u64]);
            close_pair(net, &mut rng, k_max, &[cfg.eps]).and_then(|(mut per_eps, r)| {
                let (fa, fb) = per_eps.remove(0);
                Ok((distances_for_ks(&fa, &fb, ks)?, r))
            })
        })
        .collect::<Result<_>>()?;
    let resampled: usize = close.iter().map(|r| r.1).sum();
    aggregate(
        Setting::CloseW.name(),
        &kf,
        &close.into_iter().map(|r| r.0).collect::<Vec<_>>(),
        &mut rows,
    );
    notes.push(format!("close_w: {resampled} latent draws resampled"));

    let globals: [(Setting, GlobalBasis); 2] = [
        (Setting::ToGanspace, ganspace_basis(net, cfg.ganspace_samples, cfg.seed)?),
        (Setting::ToSefa, sefa_basis(net)?),
    ];
    for (setting, basis) in &globals {
        if basis.len() < k_max {
            notes.push(format!(
                "{}: global basis has only {} directions; skipped",
                setting.name(),
                basis.len()
            ));
            continue;
        }
        let global = basis.top_subspace(k_max)?;
        let pairs: Vec<(PairDistances, usize)> = (0..cfg.n_pairs)
            .into_par_iter()
            .map(|p| {
                let mut rng = rng_from(cfg.seed, &[setting.stream(), p as u64]);
                let (f, r) = sample_frame(net, &mut rng, k_max)?;
                Ok((distances_for_ks(&f.top_subspace(k_max)?, &global, ks)?, r))
            })
            .collect::<Result<_>>()?;
        let resampled: usize = pairs.iter().map(|r| r.1).sum();
        aggregate(
            setting.name(),
            &kf,
            &pairs.into_iter().map(|r| r.0).collect::<Vec<_>>(),
            &mut rows,
        );
        notes.push(format!("{}: {resampled} latent draws resampled", setting.name()));
    }

    Ok(ExperimentReport {
        experiment: "warpage".into(),
        rows,
        config: snapshot(
            net,
            cfg.seed,
            vec![
                ("k_values", serde_json::json!(cfg.k_values)),
                ("n_pairs", serde_json::json!(cfg.n_pairs)),
                ("n_pairs_random", serde_json::json!(cfg.n_pairs_random)),
                ("eps", serde_json::json!(cfg.eps)),
                ("ganspace_samples", serde_json::json!(cfg.ganspace_samples)),
            ],
        ),
        notes,
    })
}

/// Base frame at `z` and frames at `z + ε·u` for one random unit `u` and
/// every `ε` in `eps_list`. Redraws the whole pair if any point is unusable.
#[allow(clippy::type_complexity)]
fn close_pair(
    net: &MappingNetwork,
    rng: &mut crate::rng::Rng,
    k_max: usize,
    eps_list: &[f64],
) -> Result<(Vec<(Subspace, Subspace)>, usize)> {
    let mut rejected = 0;
    'draw: loop {
        let (base, r) = sample_frame(net, rng, k_max)?;
        rejected += r;
        let dir = unit_vector(rng, net.in_dim());
        let base_sub = base.top_subspace(k_max)?;
        let mut out = Vec::with_capacity(eps_list.len());
        for &eps in eps_list {
            if eps == 0.0 {
                out.push((base_sub.clone(), base_sub.clone()));
                continue;
            }
            match frame_with_rank(net, &(base.z() + &dir * eps), k_max) {
                Ok(f) => out.push((base_sub.clone(), f.top_subspace(k_max)?)),
                Err(Error::Boundary { .. } | Error::RankDeficient { .. }) => {
                    rejected += 1;
                    if rejected > 1000 {
                        return Err(Error::Numerical("no valid close pair after 1000 draws".into()));
                    }
                    continue 'draw;
                }
                Err(e) => return Err(e),
            }
        }
        return Ok((out, rejected));
    }
}

/// Close-pair distances for each `ε`, using one base point and one direction
/// per pair across all `ε`.
pub fn eps_sweep(net: &MappingNetwork, k: usize, eps_list: &[f64], n_pairs: usize, seed: u64) -> Result<ExperimentReport> {
    if k == 0 || k > net.rank_bound() {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={}", net.rank_bound())));
    }
    if eps_list.is_empty() || eps_list.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::InvalidArgument("eps values must be finite and non-negative".into()));
    }
    if n_pairs == 0 {
        return Err(Error::InvalidArgument("n_pairs must be at least 1".into()));
    }
    let pairs: Vec<(Vec<(f64, f64)>, usize)> = (0..n_pairs)
        .into_par_iter()
        .map(|p| {
            let mut rng = rng_from(seed, &[Setting::CloseW.stream(), 0xe95, p as u64]);
            let (subs, r) = close_pair(net, &mut rng, k, eps_list)?;
            let d = subs
                .iter()
                .map(|(a, b)| Ok((projection_metric(a, b)?, geodesic_metric(a, b)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok((d, r))
        })
        .collect::<Result<_>>()?;
    let resampled: usize = pairs.iter().map(|p| p.1).sum();
    let mut rows = Vec::new();
    aggregate(
        Setting::CloseW.name(),
        eps_list,
        &pairs.into_iter().map(|p| p.0).collect::<Vec<_>>(),
        &mut rows,
    );
    Ok(ExperimentReport {
        experiment: "eps_sweep".into(),
        rows,
        config: snapshot(
            net,
            seed,
            vec![
                ("k", serde_json::json!(k)),
                ("eps", serde_json::json!(eps_list)),
                ("n_pairs", serde_json::json!(n_pairs)),
            ],
        ),
        notes: vec![format!("close_w: {resampled} latent draws resampled")],
    })
}

/// Binned singular values of the Jacobian against a Gaussian baseline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SvHistogram {
    pub edges: Vec<f64>,
    pub jacobian_counts: Vec<usize>,
    pub baseline_counts: Vec<usize>,
    pub jacobian_values: Vec<f64>,
    pub baseline_values: Vec<f64>,
    /// Pooled mean and standard deviation of the Jacobian entries; the
    /// baseline entries are rescaled to match them.
    pub entry_mean: f64,
    pub entry_std: f64,
    pub config: ConfigSnapshot,
}

impl SvHistogram {
    /// Fraction of Jacobian singular values below `rel·median`.
    pub fn jacobian_small_fraction(&self, rel: f64) -> f64 {
        small_fraction(&self.jacobian_values, rel)
    }

    pub fn baseline_small_fraction(&self, rel: f64) -> f64 {
        small_fraction(&self.baseline_values, rel)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            bin_lo: f64,
            bin_hi: f64,
            jacobian_count: usize,
            baseline_count: usize,
        }
        let mut w = csv::Writer::from_writer(out);
        for i in 0..self.jacobian_counts.len() {
            w.serialize(Row {
                bin_lo: self.edges[i],
                bin_hi: self.edges[i + 1],
                jacobian_count: self.jacobian_counts[i],
                baseline_count: self.baseline_counts[i],
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

fn small_fraction(values: &[f64], rel: f64) -> f64 {
    let threshold = rel * median(values);
    values.iter().filter(|&&v| v < threshold).count() as f64 / values.len() as f64
}

fn bin_counts(values: &[f64], edges: &[f64]) -> Vec<usize> {
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0; bins];
    for &v in values {
        let idx = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    counts
}

/// Pools singular values of the Jacobian at `n_points` Gaussian latent points
/// and of as many Gaussian matrices whose entries are rescaled to the pooled
/// mean and standard deviation of the Jacobian entries.
pub fn sv_histogram(net: &MappingNetwork, n_points: usize, bins: usize, seed: u64) -> Result<SvHistogram> {
    if n_points == 0 || bins == 0 {
        return Err(Error::InvalidArgument("n_points and bins must be at least 1".into()));
    }
    let (rows, cols) = (net.out_dim(), net.in_dim());
    let jacobians: Vec<Matrix> = (0..n_points)
        .into_par_iter()
        .map(|p| {
            let mut rng = rng_from(seed, &[0x5f, p as u64]);
            let mut z = gaussian_vector(&mut rng, cols);
            z = net.nudge_off_boundary(&z, &mut rng)?;
            net.jacobian(&z)
        })
        .collect::<Result<_>>()?;
    let entries: Vec<f64> = jacobians.iter().flat_map(|j| j.iter().copied()).collect();
    let (entry_mean, entry_std) = mean_std(&entries);

    let raw: Vec<Matrix> = (0..n_points)
        .map(|p| {
            let mut rng = rng_from(seed, &[0xba5e, p as u64]);
            Matrix::from_fn(rows, cols, |_, _| {
                use rand_distr::Distribution;
                rand_distr::StandardNormal.sample(&mut rng)
            })
        })
        .collect();
    let raw_entries: Vec<f64> = raw.iter().flat_map(|m| m.iter().copied()).collect();
    let (raw_mean, raw_std) = mean_std(&raw_entries);
    let scale = if raw_std > 0.0 { entry_std / raw_std } else { 0.0 };

    let singular = |m: &Matrix| -> Result<Vec<f64>> {
        Ok(crate::linalg::sorted_svd(m)?.values.iter().copied().collect())
    };
    let mut jacobian_values = Vec::new();
    for j in &jacobians {
        jacobian_values.extend(singular(j)?);
    }
    let mut baseline_values = Vec::new();
    for m in &raw {
        let shifted = m.map(|x| entry_mean + (x - raw_mean) * scale);
        baseline_values.extend(singular(&shifted)?);
    }

    let hi = jacobian_values
        .iter()
        .chain(&baseline_values)
        .copied()
        .fold(0.0, f64::max);
    let hi = if hi > 0.0 { hi } else { 1.0 };
    let edges: Vec<f64> = (0..=bins).map(|i| hi * i as f64 / bins as f64).collect();
    Ok(SvHistogram {
        jacobian_counts: bin_counts(&jacobian_values, &edges),
        baseline_counts: bin_counts(&baseline_values, &edges),
        edges,
        jacobian_values,
        baseline_values,
        entry_mean,
        entry_std,
        config: snapshot(
            net,
            seed,
            vec![("n_points", serde_json::json!(n_points)), ("bins", serde_json::json!(bins))],
        ),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    /// Integer mesh coordinates in `-n..=n`.
    pub x: i64,
    pub y: i64,
    /// Offsets along the two directions, `half_extent·x/n` and `half_extent·y/n`.
    pub a: f64,
    pub b: f64,
    pub w: Vec<f64>,
}

/// Latent points `w + a·d1 + b·d2` on a `(2n+1) × (2n+1)` mesh covering
/// `[-half_extent, half_extent]²`, `y` outer and `x` inner.
pub fn direction_grid(w: &Vector, d1: &Vector, d2: &Vector, half_extent: f64, n_per_axis: usize) -> Result<Vec<GridPoint>> {
    if d1.len() != w.len() || d2.len() != w.len() {
        return Err(Error::shape("grid direction", w.len(), d1.len().max(d2.len())));
    }
    if !(half_extent.is_finite() && half_extent >= 0.0) {
        return Err(Error::InvalidArgument(format!("half_extent must be non-negative, got {half_extent}")));
    }
    if n_per_axis == 0 {
        return Err(Error::InvalidArgument("n_per_axis must be at least 1".into()));
    }
    let n = n_per_axis as i64;
    let mut out = Vec::with_capacity((2 * n_per_axis + 1).pow(2));
    for y in -n..=n {
        for x in -n..=n {
            let a = half_extent * x as f64 / n as f64;
            let b = half_extent * y as f64 / n as f64;
            let mut p = w.clone();
            if a != 0.0 {
                p.axpy(a, d1, 1.0);
            }
            if b != 0.0 {
                p.axpy(b, d2, 1.0);
            }
            out.push(GridPoint {
                x,
                y,
                a,
                b,
                w: p.iter().copied().collect(),
            });
        }
    }
    Ok(out)
}

/// Mesh spanned by the one-based Local Basis directions `i` and `j`.
pub fn subspace_grid(frame: &LocalFrame, i: usize, j: usize, half_extent: f64, n_per_axis: usize) -> Result<Vec<GridPoint>> {
    for idx in [i, j] {
        if idx == 0 || idx > frame.len() {
            return Err(Error::InvalidArgument(format!("direction index {idx} outside 1..={}", frame.len())));
        }
    }
    direction_grid(
        frame.w(),
        &frame.basis_vector(i - 1),
        &frame.basis_vector(j - 1),
        half_extent,
        n_per_axis,
    )
}

/// Traversal methods compared by [`robustness_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobustnessMethod {
    Iterative,
    LocalLinear,
    GanspaceLinear,
    SefaLinear,
}

impl RobustnessMethod {
    pub fn name(&self) -> &'static str {
        match self {
            RobustnessMethod::Iterative => "iterative",
            RobustnessMethod::LocalLinear => "local_linear",
            RobustnessMethod::GanspaceLinear => "ganspace_linear",
            RobustnessMethod::SefaLinear => "sefa_linear",
        }
    }

    pub fn all() -> [RobustnessMethod; 4] {
        [
            RobustnessMethod::Iterative,
            RobustnessMethod::LocalLinear,
            RobustnessMethod::GanspaceLinear,
            RobustnessMethod::SefaLinear,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessConfig {
    /// One-based direction index (Local Basis and global bases alike).
    pub direction: usize,
    pub intensity: f64,
    /// Evenly spaced intensities in `[0, intensity]` at which residuals are
    /// measured (at least 2, so the endpoint is included).
    pub n_points: usize,
    /// Pieces of the iterative traversal.
    pub iterative_steps: usize,
    pub n_traversals: usize,
    pub restarts: usize,
    pub seed: u64,
    pub ganspace_samples: usize,
    pub methods: Vec<RobustnessMethod>,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        RobustnessConfig {
            direction: 1,
            intensity: 12.0,
            n_points: 7,
            iterative_steps: 120,
            n_traversals: 20,
            restarts: 8,
            seed: 0,
            ganspace_samples: 10_000,
            methods: RobustnessMethod::all().to_vec(),
        }
    }
}

/// Per-point residual of one traversal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualRecord {
    pub method: String,
    pub traversal: usize,
    pub point: usize,
    pub intensity: f64,
    pub residual: f64,
    pub converged: bool,
}

/// Off-manifold residuals along traversals of several methods from the same
/// starting points. Report rows: one per method and intensity, mean and std
/// over traversals.
pub fn robustness_suite(net: &MappingNetwork, cfg: &RobustnessConfig) -> Result<(ExperimentReport, Vec<ResidualRecord>)> {
    if cfg.n_points < 2 || cfg.n_traversals == 0 || cfg.iterative_steps == 0 {
        return Err(Error::InvalidArgument(
            "need n_points >= 2, n_traversals >= 1 and iterative_steps >= 1".into(),
        ));
    }
    let k = cfg.direction;
    let opts = ProjectionOptions::default();
    let ganspace = if cfg.methods.contains(&RobustnessMethod::GanspaceLinear) {
        Some(ganspace_basis(net, cfg.ganspace_samples, cfg.seed)?)
    } else {
        None
    };
    let sefa = if cfg.methods.contains(&RobustnessMethod::SefaLinear) {
        Some(sefa_basis(net)?)
    } else {
        None
    };
    let global_dir = |b: &Option<GlobalBasis>| -> Result<Vector> {
        let b = b.as_ref().expect("basis computed for requested method");
        if k > b.len() {
            return Err(Error::InvalidArgument(format!("global basis has only {} directions", b.len())));
        }
        Ok(b.direction(k - 1))
    };
    let intensities: Vec<f64> = (0..cfg.n_points)
        .map(|i| cfg.intensity * i as f64 / (cfg.n_points - 1) as f64)
        .collect();
    let stride = cfg.iterative_steps as f64 / (cfg.n_points - 1) as f64;

    let mut records = Vec::new();
    for traversal in 0..cfg.n_traversals {
        let mut rng = rng_from(cfg.seed, &[0x70b, traversal as u64]);
        let (frame, _) = sample_frame(net, &mut rng, k)?;
        for &method in &cfg.methods {
            let points: Vec<DeviationPoint> = match method {
                RobustnessMethod::Iterative => {
                    let path = iterative_traverse(net, frame.z(), k, cfg.intensity, cfg.iterative_steps, 1)?;
                    intensities
                        .iter()
                        .enumerate()
                        .map(|(i, _)| {
                            let it = &path.iterates[(i as f64 * stride).round() as usize];
                            DeviationPoint {
                                w: it.w_vector(),
                                known_z: Some(it.z_vector()),
                            }
                        })
                        .collect()
                }
                RobustnessMethod::LocalLinear => {
                    let lin = linear_traverse(net, &frame, k, cfg.intensity, cfg.n_points)?;
                    lin.w_line
                        .iter()
                        .zip(&lin.z_points)
                        .map(|(w, z)| DeviationPoint {
                            w: Vector::from_column_slice(w),
                            known_z: Some(Vector::from_column_slice(z)),
                        })
                        .collect()
                }
                RobustnessMethod::GanspaceLinear | RobustnessMethod::SefaLinear => {
                    let dir = if method == RobustnessMethod::GanspaceLinear {
                        global_dir(&ganspace)?
                    } else {
                        global_dir(&sefa)?
                    };
                    linear_w_line(frame.w(), &dir, cfg.intensity, cfg.n_points)?
                        .into_iter()
                        .map(|w| DeviationPoint {
                            w,
                            known_z: Some(frame.z().clone()),
                        })
                        .collect()
                }
            };
            let seed = crate::rng::derive_seed(cfg.seed, &[traversal as u64]);
            let devs = traversal_deviation(net, &points, cfg.restarts, seed, &opts)?;
            for (dev, &t) in devs.iter().zip(&intensities) {
                records.push(ResidualRecord {
                    method: method.name().to_string(),
                    traversal,
                    point: dev.index,
                    intensity: t,
                    residual: dev.residual,
                    converged: dev.converged,
                });
            }
        }
    }

    let mut rows = Vec::new();
    for &method in &cfg.methods {
        for &t in &intensities {
            let values: Vec<f64> = records
                .iter()
                .filter(|r| r.method == method.name() && r.intensity == t)
                .map(|r| r.residual)
                .collect();
            let (mean, std) = mean_std(&values);
            rows.push(ReportRow {
                setting: method.name().to_string(),
                param: t,
                metric: "residual_upper_bound".into(),
                mean,
                std,
                n_samples: values.len(),
            });
        }
    }
    let report = ExperimentReport {
        experiment: "robustness".into(),
        rows,
        config: snapshot(
            net,
            cfg.seed,
            vec![
                ("direction", serde_json::json!(cfg.direction)),
                ("intensity", serde_json::json!(cfg.intensity)),
                ("n_points", serde_json::json!(cfg.n_points)),
                ("iterative_steps", serde_json::json!(cfg.iterative_steps)),
                ("n_traversals", serde_json::json!(cfg.n_traversals)),
                ("restarts", serde_json::json!(cfg.restarts)),
                ("ganspace_samples", serde_json::json!(cfg.ganspace_samples)),
            ],
        ),
        notes: vec!["residuals are upper bounds on the distance to the manifold".into()],
    };
    Ok((report, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_binning() {
        let edges = vec![0.0, 0.5, 1.0];
        assert_eq!(bin_counts(&[0.0, 0.2, 0.5, 1.0, 1.0], &edges), vec![2, 3]);
    }

    #[test]
    fn grid_centre_and_size() {
        let w = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        let d1 = Vector::from_vec(vec![1.0, 0.0, 0.0]);
        let d2 = Vector::from_vec(vec![0.0, 1.0, 0.0]);
        let g = direction_grid(&w, &d1, &d2, 2.0, 2).unwrap();
        assert_eq!(g.len(), 25);
        let centre = g.iter().find(|p| p.x == 0 && p.y == 0).unwrap();
        assert_eq!(centre.w, vec![1.0, 2.0, 3.0]);
        assert_eq!(g[0].a, -2.0);
        assert_eq!(g[24].b, 2.0);
    }

    #[test]
    fn small_fraction_uses_median() {
        assert_eq!(small_fraction(&[0.01, 1.0, 1.0, 2.0], 0.1), 0.25);
    }
}
