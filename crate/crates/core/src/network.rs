//! Piecewise-affine mapping networks.
//!
//! A [`MappingNetwork`] is a chain of affine layers, each followed by either a
//! leaky-ReLU or the identity. On every cell of the activation partition the
//! network is a single affine map `z ↦ A·z + b`; the cell is identified by the
//! [`ActivationPattern`] recorded during the forward pass, and the Jacobian
//! is the masked product of the layer weights.

use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result, Vector};

/// Pre-activations closer to zero than this are treated as lying on a
/// partition boundary.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Magnitude of the random nudge used to move a point off a boundary.
pub const BOUNDARY_NUDGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    LeakyRelu { slope: f64 },
    Identity,
}

impl Activation {
    /// Slope applied to negative pre-activations (1 for the identity).
    pub fn negative_slope(&self) -> f64 {
        match *self {
            Activation::LeakyRelu { slope } => slope,
            Activation::Identity => 1.0,
        }
    }

    /// Whether the activation has a kink at zero.
    pub fn is_piecewise(&self) -> bool {
        self.negative_slope() != 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    weight: Matrix,
    bias: Vector,
    activation: Activation,
}

impl LayerSpec {
    pub fn new(weight: Matrix, bias: Vector, activation: Activation) -> Result<Self> {
        if weight.nrows() != bias.len() {
            return Err(Error::InvalidNetwork(format!(
                "weight has {} rows but bias has length {}",
                weight.nrows(),
                bias.len()
            )));
        }
        if weight.nrows() == 0 || weight.ncols() == 0 {
            return Err(Error::InvalidNetwork("layer with an empty weight matrix".into()));
        }
        if weight.iter().chain(bias.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("layer parameters".into()));
        }
        if let Activation::LeakyRelu { slope } = activation {
            if !(slope > 0.0 && slope <= 1.0) {
                return Err(Error::InvalidNetwork(format!(
                    "leaky-ReLU slope must lie in (0, 1], got {slope}"
                )));
            }
        }
        Ok(LayerSpec {
            weight,
            bias,
            activation,
        })
    }

    pub fn weight(&self) -> &Matrix {
        &self.weight
    }

    pub fn bias(&self) -> &Vector {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }
}

/// Where a point came closest to a partition boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryProximity {
    pub layer: usize,
    pub unit: usize,
    pub preactivation: f64,
}

/// Per-layer slope masks selecting one affine piece of the network.
///
/// Entry `masks[l][i]` is 1 when the pre-activation of unit `i` in layer `l`
/// was positive and the layer's negative slope otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationPattern {
    masks: Vec<Vector>,
    closest: Option<BoundaryProximity>,
}

impl ActivationPattern {
    pub fn masks(&self) -> &[Vector] {
        &self.masks
    }

    /// Smallest |pre-activation| over all kinked units, if there are any.
    pub fn closest_boundary(&self) -> Option<BoundaryProximity> {
        self.closest
    }

    pub fn is_on_boundary(&self) -> bool {
        self.closest
            .is_some_and(|c| c.preactivation.abs() < BOUNDARY_TOL)
    }

    fn boundary_error(&self) -> Option<Error> {
        self.closest
            .filter(|c| c.preactivation.abs() < BOUNDARY_TOL)
            .map(|c| Error::Boundary {
                layer: c.layer,
                unit: c.unit,
                value: c.preactivation,
                tol: BOUNDARY_TOL,
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingNetwork {
    layers: Vec<LayerSpec>,
}

impl MappingNetwork {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidNetwork("network needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::InvalidNetwork(format!(
                    "layers[{}] outputs {} values but layers[{}] expects {}",
                    i,
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(MappingNetwork { layers })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Dimension of the input noise space.
    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    /// Dimension of the ambient intermediate latent space.
    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// `min(in_dim, out_dim)`, the number of singular values of the Jacobian.
    pub fn rank_bound(&self) -> usize {
        self.in_dim().min(self.out_dim())
    }

    /// True when no layer has a kink, i.e. the network is one affine map.
    pub fn is_globally_affine(&self) -> bool {
        self.layers.iter().all(|l| !l.activation.is_piecewise())
    }

    fn check_input(&self, z: &Vector) -> Result<()> {
        if z.len() != self.in_dim() {
            return Err(Error::shape("network input", self.in_dim(), z.len()));
        }
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        Ok(())
    }

    /// Evaluates `f(z)` and records the activation pattern.
    pub fn forward(&self, z: &Vector) -> Result<(Vector, ActivationPattern)> {
        self.check_input(z)?;
        let mut h = z.clone();
        let mut masks = Vec::with_capacity(self.layers.len());
        let mut closest: Option<BoundaryProximity> = None;
        for (li, layer) in self.layers.iter().enumerate() {
            let mut pre = &layer.weight * &h;
            pre += &layer.bias;
            let slope = layer.activation.negative_slope();
            let mut mask = Vector::from_element(pre.len(), 1.0);
            if layer.activation.is_piecewise() {
                for (i, a) in pre.iter_mut().enumerate() {
                    if closest.is_none_or(|c| a.abs() < c.preactivation.abs()) {
                        closest = Some(BoundaryProximity {
                            layer: li,
                            unit: i,
                            preactivation: *a,
                        });
                    }
                    if *a <= 0.0 {
                        *a *= slope;
                        mask[i] = slope;
                    }
                }
            }
            masks.push(mask);
            h = pre;
        }
        Ok((h, ActivationPattern { masks, closest }))
    }

    /// Evaluates `f(z)` only.
    pub fn eval(&self, z: &Vector) -> Result<Vector> {
        self.forward(z).map(|(w, _)| w)
    }

    /// Jacobian of the affine piece selected by `pattern`:
    /// `D_L·W_L·…·D_1·W_1` with `D_l = diag(masks[l])`.
    pub fn jacobian_for_pattern(&self, pattern: &ActivationPattern) -> Matrix {
        let mut jac: Option<Matrix> = None;
        for (layer, mask) in self.layers.iter().zip(&pattern.masks) {
            let mut next = match &jac {
                None => layer.weight.clone(),
                Some(j) => &layer.weight * j,
            };
            if layer.activation.is_piecewise() {
                for (r, &m) in mask.iter().enumerate() {
                    if m != 1.0 {
                        next.row_mut(r).scale_mut(m);
                    }
                }
            }
            jac = Some(next);
        }
        jac.expect("network has at least one layer")
    }

    /// Exact Jacobian at `z`. Fails with [`Error::Boundary`] when `z` is within
    /// [`BOUNDARY_TOL`] of a kink.
    pub fn jacobian(&self, z: &Vector) -> Result<Matrix> {
        let (_, pattern) = self.forward(z)?;
        if let Some(err) = pattern.boundary_error() {
            return Err(err);
        }
        Ok(self.jacobian_for_pattern(&pattern))
    }

    /// Value, pattern and Jacobian in one pass; fails on boundaries like
    /// [`MappingNetwork::jacobian`].
    pub fn evaluate_with_jacobian(&self, z: &Vector) -> Result<(Vector, ActivationPattern, Matrix)> {
        let (w, pattern) = self.forward(z)?;
        if let Some(err) = pattern.boundary_error() {
            return Err(err);
        }
        let jac = self.jacobian_for_pattern(&pattern);
        Ok((w, pattern, jac))
    }

    /// First-order expansion of the network around `z_b`.
    pub fn linear_approximation_at(&self, z_b: &Vector) -> Result<AffineApproximation> {
        let (w, _, jac) = self.evaluate_with_jacobian(z_b)?;
        Ok(AffineApproximation {
            base_z: z_b.clone(),
            base_w: w,
            jacobian: jac,
        })
    }

    /// Returns `z` itself if it is off every boundary, otherwise the first
    /// `z + BOUNDARY_NUDGE·u` (u a random unit vector) that is.
    pub fn nudge_off_boundary<R: rand::Rng + ?Sized>(&self, z: &Vector, rng: &mut R) -> Result<Vector> {
        let (_, pattern) = self.forward(z)?;
        if !pattern.is_on_boundary() {
            return Ok(z.clone());
        }
        for _ in 0..64 {
            let candidate = z + crate::rng::unit_vector(rng, z.len()) * BOUNDARY_NUDGE;
            let (_, p) = self.forward(&candidate)?;
            if !p.is_on_boundary() {
                log::debug!("moved point off a partition boundary");
                return Ok(candidate);
            }
        }
        Err(pattern.boundary_error().expect("pattern is on a boundary"))
    }
}

/// The affine map `z ↦ w_b + J·(z − z_b)` tangent to the network at `z_b`.
#[derive(Debug, Clone)]
pub struct AffineApproximation {
    pub base_z: Vector,
    pub base_w: Vector,
    pub jacobian: Matrix,
}

impl AffineApproximation {
    pub fn apply(&self, z: &Vector) -> Vector {
        &self.base_w + &self.jacobian * (z - &self.base_z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaky_identity(slope: f64) -> MappingNetwork {
        let layer = LayerSpec::new(
            Matrix::identity(2, 2),
            Vector::zeros(2),
            Activation::LeakyRelu { slope },
        )
        .unwrap();
        MappingNetwork::new(vec![layer]).unwrap()
    }

    #[test]
    fn identity_layer_is_identity() {
        let layer = LayerSpec::new(Matrix::identity(3, 3), Vector::zeros(3), Activation::Identity).unwrap();
        let net = MappingNetwork::new(vec![layer]).unwrap();
        let z = Vector::from_vec(vec![0.3, -2.0, 5.0]);
        assert_eq!(net.eval(&z).unwrap(), z);
        assert!(net.is_globally_affine());
    }

    #[test]
    fn leaky_relu_definition() {
        let net = leaky_identity(0.2);
        let z = Vector::from_vec(vec![1.0, -1.0]);
        let (w, pattern) = net.forward(&z).unwrap();
        assert_eq!(w, Vector::from_vec(vec![1.0, -0.2]));
        assert_eq!(pattern.masks()[0], Vector::from_vec(vec![1.0, 0.2]));
        let jac = net.jacobian(&z).unwrap();
        assert_eq!(jac, Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 0.2])));
    }

    #[test]
    fn boundary_is_reported_with_location() {
        let net = leaky_identity(0.2);
        let z = Vector::from_vec(vec![1.0, 1e-12]);
        match net.jacobian(&z) {
            Err(Error::Boundary { layer, unit, .. }) => assert_eq!((layer, unit), (0, 1)),
            other => panic!("expected boundary error, got {other:?}"),
        }
        let mut rng = crate::rng::rng_from(0, &[]);
        let moved = net.nudge_off_boundary(&z, &mut rng).unwrap();
        assert!(net.jacobian(&moved).is_ok());
        assert!((moved - z).norm() <= 1.0001 * BOUNDARY_NUDGE);
    }

    #[test]
    fn shape_and_finiteness_errors() {
        let net = leaky_identity(0.2);
        assert!(matches!(
            net.forward(&Vector::zeros(3)),
            Err(Error::Shape { expected: 2, got: 3, .. })
        ));
        assert!(matches!(
            net.forward(&Vector::from_vec(vec![f64::NAN, 0.0])),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn construction_invariants() {
        assert!(LayerSpec::new(Matrix::zeros(2, 2), Vector::zeros(3), Activation::Identity).is_err());
        assert!(LayerSpec::new(
            Matrix::zeros(2, 2),
            Vector::zeros(2),
            Activation::LeakyRelu { slope: 0.0 }
        )
        .is_err());
        let a = LayerSpec::new(Matrix::zeros(3, 2), Vector::zeros(3), Activation::Identity).unwrap();
        let b = LayerSpec::new(Matrix::zeros(2, 2), Vector::zeros(2), Activation::Identity).unwrap();
        assert!(MappingNetwork::new(vec![a, b]).is_err());
        assert!(MappingNetwork::new(vec![]).is_err());
    }

    #[test]
    fn slope_one_has_no_boundaries() {
        let net = leaky_identity(1.0);
        assert!(net.is_globally_affine());
        assert!(net.jacobian(&Vector::zeros(2)).is_ok());
    }

    #[test]
    fn affine_net_jacobian_is_weight_product() {
        let w1 = Matrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.0, 3.0]);
        let w2 = Matrix::from_row_slice(2, 3, &[0.5, 1.0, -2.0, 1.5, 0.0, 1.0]);
        let net = MappingNetwork::new(vec![
            LayerSpec::new(w1.clone(), Vector::from_vec(vec![0.1, 0.2, 0.3]), Activation::Identity).unwrap(),
            LayerSpec::new(w2.clone(), Vector::zeros(2), Activation::LeakyRelu { slope: 1.0 }).unwrap(),
        ])
        .unwrap();
        let expected = &w2 * &w1;
        for z in [[0.0, 0.0], [5.0, -3.0], [-1.0, 0.25]] {
            let jac = net.jacobian(&Vector::from_row_slice(&z)).unwrap();
            assert!((jac - &expected).amax() < 1e-15);
        }
    }
}
