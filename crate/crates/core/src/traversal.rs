//! Traversals of the latent manifold along Local Basis directions.
//!
//! - [`linear_traverse`]: straight line `w + t·v_k` together with its latent
//!   counterpart `f(z + (t/σ_k)·u_k)`.
//! - [`iterative_traverse`]: the curve is cut into `N` pieces; each piece
//!   departs along the Local Basis vector at the current point that is most
//!   aligned with the previous departure direction, and moves by `(I/N)/σ_j`
//!   along the matching latent direction. Every iterate is `f(z_n)`, so the
//!   path never leaves the manifold.
//! - [`guided_iterative_traverse`]: same scheme, but directions are selected
//!   by similarity to an external global direction, with fixed or random
//!   step lengths.

use rand::Rng as _;
use serde::Serialize;

use crate::local_basis::{local_basis, LocalFrame};
use crate::network::MappingNetwork;
use crate::{Error, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraversalMode {
    Linear,
    Iterative,
    GuidedIterative,
    StochasticGuided,
}

/// How a piece of the path left its starting iterate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Departure {
    /// One-based index of the Local Basis vector used.
    pub direction_index: usize,
    /// Oriented Local Basis vector `±v_j`.
    pub direction: Vec<f64>,
    pub sigma: f64,
    /// Length requested for this piece in `W̃` (`I/N` for fixed steps).
    pub step_length: f64,
    /// Signed cosine between the chosen direction and the comparison target
    /// (previous departure or guide), after orientation. `None` for the first
    /// unguided step.
    pub cosine: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Iterate {
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    /// Absent for the final iterate.
    pub departure: Option<Departure>,
}

impl Iterate {
    pub fn z_vector(&self) -> Vector {
        Vector::from_column_slice(&self.z)
    }

    pub fn w_vector(&self) -> Vector {
        Vector::from_column_slice(&self.w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraversalPath {
    pub mode: TraversalMode,
    pub intensity: f64,
    pub n_steps: usize,
    pub iterates: Vec<Iterate>,
}

impl TraversalPath {
    /// Number of completed pieces.
    pub fn n_steps_taken(&self) -> usize {
        self.iterates.len().saturating_sub(1)
    }

    pub fn start(&self) -> &Iterate {
        &self.iterates[0]
    }

    pub fn end(&self) -> &Iterate {
        &self.iterates[self.iterates.len() - 1]
    }

    /// `‖w_{n+1} − w_n‖` for every piece.
    pub fn chord_lengths(&self) -> Vec<f64> {
        self.iterates
            .windows(2)
            .map(|p| {
                p[0].w
                    .iter()
                    .zip(&p[1].w)
                    .map(|(a, b)| (b - a).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    /// Cosine between consecutive departure directions (`None` for the first).
    pub fn consecutive_cosines(&self) -> Vec<Option<f64>> {
        let deps: Vec<&Departure> = self.iterates.iter().filter_map(|i| i.departure.as_ref()).collect();
        (0..deps.len())
            .map(|n| {
                (n > 0).then(|| {
                    deps[n - 1]
                        .direction
                        .iter()
                        .zip(&deps[n].direction)
                        .map(|(a, b)| a * b)
                        .sum()
                })
            })
            .collect()
    }
}

/// Points of a linear traversal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearTraversal {
    pub direction_index: usize,
    pub t: Vec<f64>,
    /// `w + t·v_k`, the straight line in `W̃`.
    pub w_line: Vec<Vec<f64>>,
    /// `z + (t/σ_k)·u_k`.
    pub z_points: Vec<Vec<f64>>,
    /// `f(z + (t/σ_k)·u_k)`, on the manifold.
    pub pushforward: Vec<Vec<f64>>,
}

fn to_vec(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

fn evenly_spaced(intensity: f64, n_points: usize) -> Vec<f64> {
    match n_points {
        1 => vec![0.0],
        _ => (0..n_points)
            .map(|i| intensity * i as f64 / (n_points - 1) as f64)
            .collect(),
    }
}

fn check_intensity(intensity: f64) -> Result<()> {
    if !intensity.is_finite() {
        return Err(Error::InvalidArgument(format!("intensity must be finite, got {intensity}")));
    }
    Ok(())
}

/// Linear traversal along the one-based direction `k` of `frame`, for `t`
/// evenly spaced on `[0, intensity]`.
pub fn linear_traverse(
    net: &MappingNetwork,
    frame: &LocalFrame,
    k: usize,
    intensity: f64,
    n_points: usize,
) -> Result<LinearTraversal> {
    check_intensity(intensity)?;
    if n_points == 0 {
        return Err(Error::InvalidArgument("n_points must be at least 1".into()));
    }
    frame.check_direction(k)?;
    let sigma = frame.sigma(k - 1);
    let u = frame.latent_direction(k - 1);
    let v = frame.basis_vector(k - 1);
    let t = evenly_spaced(intensity, n_points);
    let mut w_line = Vec::with_capacity(n_points);
    let mut z_points = Vec::with_capacity(n_points);
    let mut pushforward = Vec::with_capacity(n_points);
    for &ti in &t {
        if ti == 0.0 {
            w_line.push(to_vec(frame.w()));
            z_points.push(to_vec(frame.z()));
            pushforward.push(to_vec(frame.w()));
            continue;
        }
        let z = frame.z() + &u * (ti / sigma);
        w_line.push(to_vec(&(frame.w() + &v * ti)));
        pushforward.push(to_vec(&net.eval(&z)?));
        z_points.push(to_vec(&z));
    }
    Ok(LinearTraversal {
        direction_index: k,
        t,
        w_line,
        z_points,
        pushforward,
    })
}

/// Straight line `w + t·direction/‖direction‖` for `t` evenly spaced on
/// `[0, intensity]`; used for global-basis traversals.
pub fn linear_w_line(w: &Vector, direction: &Vector, intensity: f64, n_points: usize) -> Result<Vec<Vector>> {
    check_intensity(intensity)?;
    if w.len() != direction.len() {
        return Err(Error::shape("traversal direction", w.len(), direction.len()));
    }
    let norm = direction.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::InvalidDirection("direction must be non-zero and finite".into()));
    }
    let unit = direction / norm;
    Ok(evenly_spaced(intensity, n_points.max(1))
        .into_iter()
        .map(|t| w + &unit * t)
        .collect())
}

/// How the departure direction is re-selected at each iterate after the first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimilarityTarget {
    /// Compare against the guide direction at every step.
    GlobalEveryStep,
    /// Compare against the guide only at the first step, then against the
    /// previous departure direction.
    PreviousDirection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSizePolicy {
    /// `N` pieces of length `I/N`.
    Fixed,
    /// Piece lengths drawn from `U[lo, hi]` until the total reaches `I`; the
    /// last piece is shortened to land exactly on `I`.
    UniformRandom { lo: f64, hi: f64, seed: u64 },
}

/// Picks the frame column most aligned (in absolute cosine) with `target`,
/// smaller index on ties, and returns `(zero-based index, orientation, |cos|)`.
fn select_direction(frame: &LocalFrame, target: &Vector) -> (usize, f64, f64) {
    let cosines = frame.basis().transpose() * target;
    let mut best = 0;
    for i in 1..cosines.len() {
        if cosines[i].abs() > cosines[best].abs() {
            best = i;
        }
    }
    let c = cosines[best];
    let orientation = if c < 0.0 { -1.0 } else { 1.0 };
    (best, orientation, c.abs())
}

/// State shared by the iterative engines.
struct Walker<'a> {
    net: &'a MappingNetwork,
    mode: TraversalMode,
    intensity: f64,
    planned: usize,
    iterates: Vec<Iterate>,
    z: Vector,
    nudge_rng: crate::rng::Rng,
}

impl<'a> Walker<'a> {
    fn new(net: &'a MappingNetwork, z0: &Vector, mode: TraversalMode, intensity: f64, planned: usize) -> Result<Self> {
        let w0 = net.eval(z0)?;
        Ok(Walker {
            net,
            mode,
            intensity,
            planned,
            iterates: vec![Iterate {
                z: to_vec(z0),
                w: to_vec(&w0),
                departure: None,
            }],
            z: z0.clone(),
            nudge_rng: crate::rng::rng_from(0x7a11, &[]),
        })
    }

    fn path(&self) -> TraversalPath {
        TraversalPath {
            mode: self.mode,
            intensity: self.intensity,
            n_steps: self.iterates.len() - 1,
            iterates: self.iterates.clone(),
        }
    }

    fn abort(&self, err: Error) -> Error {
        Error::TraversalAborted {
            partial: Box::new(self.path()),
            planned_steps: self.planned,
            source: Box::new(err),
        }
    }

    /// Frame at the current iterate. A point that landed on a partition
    /// boundary is nudged off it first; the stored iterate is updated so that
    /// `w_n = f(z_n)` still holds.
    fn frame(&mut self) -> Result<LocalFrame> {
        match local_basis(self.net, &self.z) {
            Err(Error::Boundary { layer, unit, .. }) => {
                log::warn!(
                    "iterate {} lies on a partition boundary (layer {layer}, unit {unit}); nudging",
                    self.iterates.len() - 1
                );
                let moved = self
                    .net
                    .nudge_off_boundary(&self.z, &mut self.nudge_rng)
                    .map_err(|e| self.abort(e))?;
                let w = self.net.eval(&moved).map_err(|e| self.abort(e))?;
                let last = self.iterates.last_mut().expect("at least one iterate");
                last.z = to_vec(&moved);
                last.w = to_vec(&w);
                self.z = moved;
                local_basis(self.net, &self.z).map_err(|e| self.abort(e))
            }
            other => other.map_err(|e| self.abort(e)),
        }
    }

    /// Moves `step_length` along the oriented column `index` of `frame`.
    fn step(
        &mut self,
        frame: &LocalFrame,
        index: usize,
        orientation: f64,
        step_length: f64,
        cosine: Option<f64>,
    ) -> Result<Vector> {
        frame.check_direction(index + 1).map_err(|e| self.abort(e))?;
        let sigma = frame.sigma(index);
        let u = frame.latent_direction(index) * orientation;
        let v = frame.basis_vector(index) * orientation;
        let next_z = &self.z + u * (step_length / sigma);
        let next_w = self.net.eval(&next_z).map_err(|e| self.abort(e))?;
        let last = self.iterates.last_mut().expect("at least one iterate");
        last.departure = Some(Departure {
            direction_index: index + 1,
            direction: to_vec(&v),
            sigma,
            step_length,
            cosine,
        });
        self.iterates.push(Iterate {
            z: to_vec(&next_z),
            w: to_vec(&next_w),
            departure: None,
        });
        self.z = next_z;
        Ok(v)
    }
}

/// Iterative curve traversal along the one-based direction `k`, `n_steps`
/// pieces of length `intensity / n_steps`. `sign = -1` traverses the
/// reversed tangent vector.
pub fn iterative_traverse(
    net: &MappingNetwork,
    z0: &Vector,
    k: usize,
    intensity: f64,
    n_steps: usize,
    sign: i32,
) -> Result<TraversalPath> {
    check_intensity(intensity)?;
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
    }
    if sign != 1 && sign != -1 {
        return Err(Error::InvalidArgument(format!("sign must be +1 or -1, got {sign}")));
    }
    let mut walker = Walker::new(net, z0, TraversalMode::Iterative, intensity, n_steps)?;
    let step_length = intensity / n_steps as f64;
    let mut previous: Option<Vector> = None;
    for _ in 0..n_steps {
        let frame = walker.frame()?;
        let (index, orientation, cosine) = match &previous {
            None => {
                frame.check_direction(k).map_err(|e| walker.abort(e))?;
                (k - 1, f64::from(sign), None)
            }
            Some(prev) => {
                let (j, o, c) = select_direction(&frame, prev);
                (j, o, Some(c))
            }
        };
        previous = Some(walker.step(&frame, index, orientation, step_length, cosine)?);
    }
    Ok(walker.path())
}

/// Both branches of an iterative traversal, concatenated from the far end of
/// the negative branch through `z0` to the end of the positive branch
/// (`2·n_steps + 1` iterates).
pub fn iterative_traverse_both(
    net: &MappingNetwork,
    z0: &Vector,
    k: usize,
    intensity: f64,
    n_steps: usize,
) -> Result<TraversalPath> {
    let positive = iterative_traverse(net, z0, k, intensity, n_steps, 1)?;
    let negative = iterative_traverse(net, z0, k, intensity, n_steps, -1)?;
    let mut iterates: Vec<Iterate> = negative
        .iterates
        .into_iter()
        .rev()
        .map(|mut it| {
            it.departure = None;
            it
        })
        .collect();
    iterates.pop();
    iterates.extend(positive.iterates);
    Ok(TraversalPath {
        mode: TraversalMode::Iterative,
        intensity,
        n_steps: 2 * n_steps,
        iterates,
    })
}

/// Iterative traversal steered by an external direction `guide` in `W̃`.
///
/// With [`StepSizePolicy::Fixed`] the path has `n_steps` pieces of length
/// `intensity / n_steps`; with [`StepSizePolicy::UniformRandom`] `n_steps` is
/// ignored and pieces are drawn until their total length reaches `intensity`.
pub fn guided_iterative_traverse(
    net: &MappingNetwork,
    z0: &Vector,
    guide: &Vector,
    intensity: f64,
    n_steps: usize,
    policy: StepSizePolicy,
    target: SimilarityTarget,
) -> Result<TraversalPath> {
    check_intensity(intensity)?;
    if intensity < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "guided traversal needs a non-negative intensity, got {intensity}"
        )));
    }
    if guide.len() != net.out_dim() {
        return Err(Error::shape("guide direction", net.out_dim(), guide.len()));
    }
    let norm = guide.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::InvalidDirection("guide direction must be non-zero and finite".into()));
    }
    let guide = guide / norm;

    let lengths: Vec<f64> = match policy {
        StepSizePolicy::Fixed => {
            if n_steps == 0 {
                return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
            }
            vec![intensity / n_steps as f64; n_steps]
        }
        StepSizePolicy::UniformRandom { lo, hi, seed } => {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "uniform step sizes need 0 < lo < hi, got lo = {lo}, hi = {hi}"
                )));
            }
            let mut rng = crate::rng::rng_from(seed, &[0x5709]);
            let mut lengths = Vec::new();
            let mut total = 0.0;
            while total < intensity {
                let draw = rng.random_range(lo..hi);
                if total + draw >= intensity {
                    lengths.push(intensity - total);
                    break;
                }
                total += draw;
                lengths.push(draw);
            }
            lengths
        }
    };
    let mode = match policy {
        StepSizePolicy::Fixed => TraversalMode::GuidedIterative,
        StepSizePolicy::UniformRandom { .. } => TraversalMode::StochasticGuided,
    };
    let mut walker = Walker::new(net, z0, mode, intensity, lengths.len())?;
    let mut previous: Option<Vector> = None;
    for length in lengths {
        let frame = walker.frame()?;
        let reference = match (target, &previous) {
            (SimilarityTarget::PreviousDirection, Some(prev)) => prev.clone(),
            _ => guide.clone(),
        };
        let (j, orientation, cosine) = select_direction(&frame, &reference);
        previous = Some(walker.step(&frame, j, orientation, length, Some(cosine))?);
    }
    Ok(walker.path())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Activation, LayerSpec};
    use crate::Matrix;

    fn affine_net() -> MappingNetwork {
        let w = Matrix::from_row_slice(3, 2, &[2.0, 0.5, 0.0, 1.0, 1.0, -1.0]);
        MappingNetwork::new(vec![LayerSpec::new(w, Vector::from_vec(vec![0.1, 0.0, -0.2]), Activation::Identity).unwrap()])
            .unwrap()
    }

    #[test]
    fn single_step_is_linear_step() {
        let net = affine_net();
        let z0 = Vector::from_vec(vec![0.3, -0.4]);
        let frame = local_basis(&net, &z0).unwrap();
        let path = iterative_traverse(&net, &z0, 2, 1.5, 1, 1).unwrap();
        let expected = &z0 + frame.latent_direction(1) * (1.5 / frame.sigma(1));
        assert_eq!(path.iterates.len(), 2);
        assert!((path.end().z_vector() - expected).amax() < 1e-15);
    }

    #[test]
    fn rejects_bad_arguments() {
        let net = affine_net();
        let z0 = Vector::zeros(2);
        assert!(iterative_traverse(&net, &z0, 1, 1.0, 0, 1).is_err());
        assert!(iterative_traverse(&net, &z0, 1, 1.0, 1, 0).is_err());
        assert!(iterative_traverse(&net, &z0, 3, 1.0, 1, 1).is_err());
        let zero = Vector::zeros(3);
        assert!(matches!(
            guided_iterative_traverse(&net, &z0, &zero, 1.0, 2, StepSizePolicy::Fixed, SimilarityTarget::GlobalEveryStep),
            Err(Error::InvalidDirection(_))
        ));
        let g = Vector::from_vec(vec![1.0, 0.0, 0.0]);
        let bad = StepSizePolicy::UniformRandom { lo: 0.2, hi: 0.1, seed: 0 };
        assert!(guided_iterative_traverse(&net, &z0, &g, 1.0, 2, bad, SimilarityTarget::GlobalEveryStep).is_err());
    }

    #[test]
    fn rank_deficient_direction_aborts_with_partial_path() {
        let w = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let net = MappingNetwork::new(vec![LayerSpec::new(w, Vector::zeros(2), Activation::Identity).unwrap()]).unwrap();
        match iterative_traverse(&net, &Vector::zeros(2), 2, 1.0, 3, 1) {
            Err(Error::TraversalAborted { partial, planned_steps, source }) => {
                assert_eq!(planned_steps, 3);
                assert_eq!(partial.iterates.len(), 1);
                assert!(matches!(*source, Error::RankDeficient { .. }));
            }
            other => panic!("expected abort, got {other:?}"),
        }
    }

    #[test]
    fn stochastic_steps_land_on_intensity() {
        let net = affine_net();
        let g = Vector::from_vec(vec![1.0, 0.2, 0.0]);
        let policy = StepSizePolicy::UniformRandom { lo: 0.05, hi: 0.15, seed: 3 };
        let path = guided_iterative_traverse(&net, &Vector::zeros(2), &g, 1.0, 0, policy, SimilarityTarget::GlobalEveryStep)
            .unwrap();
        let total: f64 = path
            .iterates
            .iter()
            .filter_map(|i| i.departure.as_ref())
            .map(|d| d.step_length)
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(path.mode, TraversalMode::StochasticGuided);
    }

    #[test]
    fn linear_traverse_endpoints() {
        let net = affine_net();
        let z0 = Vector::from_vec(vec![0.3, -0.4]);
        let frame = local_basis(&net, &z0).unwrap();
        let lin = linear_traverse(&net, &frame, 1, 2.0, 5).unwrap();
        assert_eq!(lin.t, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(lin.w_line[0], to_vec(frame.w()));
        assert_eq!(lin.z_points[0], to_vec(frame.z()));
        for (a, b) in lin.w_line.iter().zip(&lin.pushforward) {
            let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(d < 1e-14);
        }
    }
}
