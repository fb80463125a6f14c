use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::{log_abs_det, matrix_from_rows};
use crate::nn::Network;
use crate::rng::SeededRng;

/// Finite-difference step for Jacobians without a closed form.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelProvenance {
    /// Follows from the construction of the map.
    Analytic,
    /// Not known in closed form (randomly initialised networks).
    Unverified,
}

/// Ground-truth uniqueness label of an encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub invertible: bool,
    pub provenance: LabelProvenance,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct AffineMap {
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub log_abs_det: f64,
    pub det_sign: f64,
    inverse: Option<DMatrix<f64>>,
}

impl AffineMap {
    fn new(matrix: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() != offset.len() {
            return Err(Error::invalid(
                "affine encoder needs a square matrix and a matching offset",
            ));
        }
        let (log_abs_det, det_sign) = log_abs_det(&matrix)?;
        let inverse = if det_sign != 0.0 {
            matrix.clone().try_inverse()
        } else {
            None
        };
        Ok(Self {
            matrix,
            offset,
            log_abs_det,
            det_sign,
            inverse,
        })
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x + &self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum EncoderKind {
    /// `z = A z⁰ + b`
    Affine(AffineMap),
    /// `z = c z⁰ + b`
    ScaledAffine {
        scale: f64,
        offset: DVector<f64>,
    },
    /// `z = tanh(A z⁰ + b)` componentwise
    SmoothBijection(AffineMap),
    /// keeps the listed coordinates, in order
    Collapsing {
        keep: Vec<usize>,
    },
    /// `z_i = t + |z⁰_i − t|` on the listed coordinates
    Folding {
        coordinates: Vec<usize>,
        threshold: f64,
    },
    /// `z = g(z⁰) + σ ε`
    Noisy {
        sigma: f64,
        inner: Box<EncoderKind>,
    },
    RandomMlp(Network),
}

/// A synthetic encoding pipeline `z = g(z⁰)` with known Jacobian and
/// ground-truth invertibility.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderSpec {
    pub id: String,
    pub(crate) kind: EncoderKind,
    input_dim: usize,
    output_dim: usize,
    seed: u64,
}

/// One entry of an encoder zoo file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub id: String,
    pub kind: String,
    #[serde(default)]
    pub params: Value,
    #[serde(default)]
    pub seed: u64,
}

fn kind_output_dim(kind: &EncoderKind, input_dim: usize) -> usize {
    match kind {
        EncoderKind::Collapsing { keep } => keep.len(),
        EncoderKind::Noisy { inner, .. } => kind_output_dim(inner, input_dim),
        EncoderKind::RandomMlp(net) => net.output_dim(),
        _ => input_dim,
    }
}

impl EncoderSpec {
    fn from_kind(id: impl Into<String>, kind: EncoderKind, input_dim: usize, seed: u64) -> Self {
        let output_dim = kind_output_dim(&kind, input_dim);
        Self {
            id: id.into(),
            kind,
            input_dim,
            output_dim,
            seed,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::affine(DMatrix::identity(dim, dim), DVector::zeros(dim))
            .expect("identity is a valid affine map")
            .with_id("identity")
    }

    pub fn affine(matrix: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        let dim = matrix.ncols();
        let map = AffineMap::new(matrix, offset)?;
        Ok(Self::from_kind("affine", EncoderKind::Affine(map), dim, 0))
    }

    pub fn scaled(dim: usize, scale: f64) -> Self {
        Self::from_kind(
            format!("scaled-{scale}"),
            EncoderKind::ScaledAffine {
                scale,
                offset: DVector::zeros(dim),
            },
            dim,
            0,
        )
    }

    pub fn smooth_bijection(matrix: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        let dim = matrix.ncols();
        let map = AffineMap::new(matrix, offset)?;
        Ok(Self::from_kind(
            "smooth-bijection",
            EncoderKind::SmoothBijection(map),
            dim,
            0,
        ))
    }

    /// Drop the listed coordinates.
    pub fn collapsing(dim: usize, drop: &[usize]) -> Result<Self> {
        if drop.iter().any(|&i| i >= dim) {
            return Err(Error::invalid("collapsing encoder drops a coordinate out of range"));
        }
        let keep: Vec<usize> = (0..dim).filter(|i| !drop.contains(i)).collect();
        if keep.is_empty() {
            return Err(Error::invalid("collapsing encoder must keep at least one coordinate"));
        }
        Ok(Self::from_kind(
            "collapsing-projection",
            EncoderKind::Collapsing { keep },
            dim,
            0,
        ))
    }

    /// Fold the listed coordinates about `threshold`.
    pub fn folding(dim: usize, coordinates: &[usize], threshold: f64) -> Result<Self> {
        if coordinates.is_empty() || coordinates.iter().any(|&i| i >= dim) {
            return Err(Error::invalid("folding coordinates must be non-empty and in range"));
        }
        Ok(Self::from_kind(
            "folding",
            EncoderKind::Folding {
                coordinates: coordinates.to_vec(),
                threshold,
            },
            dim,
            0,
        ))
    }

    /// Wrap an encoder with additive Gaussian noise of standard deviation `sigma`.
    pub fn noisy(inner: EncoderSpec, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("noise standard deviation must be finite and ≥ 0"));
        }
        let id = format!("{}+noise({sigma})", inner.id);
        Ok(Self::from_kind(
            id,
            EncoderKind::Noisy {
                sigma,
                inner: Box::new(inner.kind),
            },
            inner.input_dim,
            inner.seed,
        )
        .with_seed(inner.seed))
    }

    /// A randomly initialised ReLU network `[dim, hidden.., output_dim]`.
    pub fn random_mlp(dim: usize, hidden: &[usize], output_dim: usize, seed: u64) -> Result<Self> {
        let mut sizes = vec![dim];
        sizes.extend_from_slice(hidden);
        sizes.push(output_dim);
        let net = Network::new(&sizes, seed)?;
        Ok(Self::from_kind("random-mlp", EncoderKind::RandomMlp(net), dim, seed))
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Seed for the noise stream of [`EncoderSpec::encode_trajectory`] when
    /// callers do not pass their own.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn is_square(&self) -> bool {
        self.input_dim == self.output_dim
    }

    pub fn kind_name(&self) -> &'static str {
        kind_name(&self.kind)
    }

    pub fn ground_truth(&self) -> GroundTruth {
        ground_truth(&self.kind, self.input_dim)
    }

    /// Build from a zoo entry for true states of dimension `input_dim`.
    pub fn from_config(cfg: &EncoderConfig, input_dim: usize) -> Result<Self> {
        let field = |name: &str| format!("encoder `{}`: params.{name}", cfg.id);
        let kind = kind_from_params(&cfg.kind, &cfg.params, input_dim, cfg.seed, &field).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::Config(format!("encoder `{}`: {m}", cfg.id)),
            other => other,
        })?;
        if cfg.id.is_empty() {
            return Err(Error::Config("encoder id must not be empty".into()));
        }
        Ok(Self::from_kind(cfg.id.clone(), kind, input_dim, cfg.seed))
    }

    fn check_input(&self, z0: &DVector<f64>) -> Result<()> {
        if z0.len() != self.input_dim {
            return Err(Error::invalid(format!(
                "encoder `{}` expects {} inputs, got {}",
                self.id,
                self.input_dim,
                z0.len()
            )));
        }
        Ok(())
    }

    /// `z = g(z⁰)`. The seed is consumed only by the noise wrapper.
    pub fn encode(&self, z0: &DVector<f64>, seed: u64) -> Result<DVector<f64>> {
        self.encode_with(z0, &mut SeededRng::new(seed))
    }

    pub(crate) fn encode_with(&self, z0: &DVector<f64>, rng: &mut SeededRng) -> Result<DVector<f64>> {
        self.check_input(z0)?;
        apply_kind(&self.kind, z0, rng)
    }

    /// Noise-free part of the pipeline.
    pub fn encode_mean(&self, z0: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_input(z0)?;
        Ok(apply_deterministic(&self.kind, z0))
    }

    /// Jacobian `∂g/∂z⁰` of the noise-free part, `[d_z × 2k]`.
    pub fn jacobian(&self, z0: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_input(z0)?;
        jacobian_of(&self.kind, z0, self.input_dim)
    }

    /// `ln|det J_g(z⁰)|` and the determinant sign; `(-inf, 0)` when singular.
    pub fn log_abs_det_jacobian(&self, z0: &DVector<f64>) -> Result<LogAbsDet> {
        if !self.is_square() {
            return Err(Error::invalid(format!(
                "encoder `{}` maps {} → {} dimensions; ln|J| needs a square Jacobian",
                self.id, self.input_dim, self.output_dim
            )));
        }
        self.check_input(z0)?;
        let (log_abs, sign) = match &self.kind {
            EncoderKind::Affine(map) => (map.log_abs_det, map.det_sign),
            EncoderKind::ScaledAffine { scale, .. } => {
                let d = self.input_dim as f64;
                let sign = if *scale == 0.0 {
                    0.0
                } else if *scale < 0.0 && self.input_dim % 2 == 1 {
                    -1.0
                } else {
                    1.0
                };
                (d * scale.abs().ln(), sign)
            }
            _ => log_abs_det(&self.jacobian(z0)?)?,
        };
        Ok(LogAbsDet { log_abs, sign })
    }

    /// `g⁻¹(z)` for encoders labelled invertible.
    pub fn inverse(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        if z.len() != self.output_dim {
            return Err(Error::invalid("latent has the wrong dimension"));
        }
        if !self.is_square() {
            return Err(Error::NotInvertible(self.id.clone()));
        }
        invert_kind(&self.kind).map_or_else(
            || Err(Error::NotInvertible(self.id.clone())),
            |f| f(z).ok_or_else(|| Error::NotInvertible(self.id.clone())),
        )
    }
}

/// `ln|det J|` with the sign of the determinant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogAbsDet {
    pub log_abs: f64,
    /// `+1`, `-1`, or `0` for a singular Jacobian (then `log_abs` is `-inf`).
    pub sign: f64,
}

impl LogAbsDet {
    pub fn is_singular(&self) -> bool {
        self.sign == 0.0
    }
}

fn kind_name(kind: &EncoderKind) -> &'static str {
    match kind {
        EncoderKind::Affine(_) => "affine",
        EncoderKind::ScaledAffine { .. } => "scaled-affine",
        EncoderKind::SmoothBijection(_) => "smooth-bijection",
        EncoderKind::Collapsing { .. } => "collapsing-projection",
        EncoderKind::Folding { .. } => "folding",
        EncoderKind::Noisy { .. } => "additive-noise",
        EncoderKind::RandomMlp(_) => "random-mlp",
    }
}

fn ground_truth(kind: &EncoderKind, input_dim: usize) -> GroundTruth {
    let analytic = |invertible| GroundTruth {
        invertible,
        provenance: LabelProvenance::Analytic,
    };
    match kind {
        EncoderKind::Affine(map) | EncoderKind::SmoothBijection(map) => analytic(map.det_sign != 0.0),
        EncoderKind::ScaledAffine { scale, .. } => analytic(*scale != 0.0),
        EncoderKind::Collapsing { keep } => analytic(keep.len() == input_dim),
        EncoderKind::Folding { .. } => analytic(false),
        EncoderKind::Noisy { sigma, inner } => {
            let inner = ground_truth(inner, input_dim);
            GroundTruth {
                invertible: *sigma == 0.0 && inner.invertible,
                provenance: inner.provenance,
            }
        }
        EncoderKind::RandomMlp(_) => GroundTruth {
            invertible: false,
            provenance: LabelProvenance::Unverified,
        },
    }
}

fn apply_deterministic(kind: &EncoderKind, x: &DVector<f64>) -> DVector<f64> {
    match kind {
        EncoderKind::Affine(map) => map.apply(x),
        EncoderKind::ScaledAffine { scale, offset } => x * *scale + offset,
        EncoderKind::SmoothBijection(map) => map.apply(x).map(f64::tanh),
        EncoderKind::Collapsing { keep } => DVector::from_iterator(keep.len(), keep.iter().map(|&i| x[i])),
        EncoderKind::Folding { coordinates, threshold } => {
            let mut z = x.clone();
            for &i in coordinates {
                z[i] = threshold + (x[i] - threshold).abs();
            }
            z
        }
        EncoderKind::Noisy { inner, .. } => apply_deterministic(inner, x),
        EncoderKind::RandomMlp(net) => {
            let out = net
                .predict(&DMatrix::from_row_slice(1, x.len(), x.as_slice()))
                .expect("input width checked by caller");
            DVector::from_iterator(out.ncols(), out.row(0).iter().copied())
        }
    }
}

fn apply_kind(kind: &EncoderKind, x: &DVector<f64>, rng: &mut SeededRng) -> Result<DVector<f64>> {
    match kind {
        EncoderKind::Noisy { sigma, inner } => {
            let mut z = apply_kind(inner, x, rng)?;
            if *sigma > 0.0 {
                for v in z.iter_mut() {
                    *v += sigma * rng.normal();
                }
            }
            Ok(z)
        }
        other => Ok(apply_deterministic(other, x)),
    }
}

fn jacobian_of(kind: &EncoderKind, x: &DVector<f64>, dim: usize) -> Result<DMatrix<f64>> {
    Ok(match kind {
        EncoderKind::Affine(map) => map.matrix.clone(),
        EncoderKind::ScaledAffine { scale, .. } => DMatrix::identity(dim, dim) * *scale,
        EncoderKind::SmoothBijection(map) => {
            let z = map.apply(x).map(f64::tanh);
            let mut j = map.matrix.clone();
            for (r, zr) in z.iter().enumerate() {
                j.row_mut(r).scale_mut(1.0 - zr * zr);
            }
            j
        }
        EncoderKind::Collapsing { keep } => {
            let mut j = DMatrix::zeros(keep.len(), dim);
            for (r, &c) in keep.iter().enumerate() {
                j[(r, c)] = 1.0;
            }
            j
        }
        EncoderKind::Folding { coordinates, threshold } => {
            let mut j = DMatrix::identity(dim, dim);
            for &i in coordinates {
                let d = x[i] - threshold;
                if d == 0.0 {
                    return Err(Error::NonDifferentiable(format!(
                        "coordinate {i} lies exactly on the fold at {threshold}"
                    )));
                }
                j[(i, i)] = d.signum();
            }
            j
        }
        EncoderKind::Noisy { inner, .. } => jacobian_of(inner, x, dim)?,
        EncoderKind::RandomMlp(net) => {
            let mut j = DMatrix::zeros(net.output_dim(), dim);
            for c in 0..dim {
                let mut plus = x.clone();
                let mut minus = x.clone();
                plus[c] += FD_STEP;
                minus[c] -= FD_STEP;
                let diff = (apply_deterministic(kind, &plus) - apply_deterministic(kind, &minus)) / (2.0 * FD_STEP);
                j.set_column(c, &diff);
            }
            j
        }
    })
}

type InverseFn<'a> = Box<dyn Fn(&DVector<f64>) -> Option<DVector<f64>> + 'a>;

fn invert_kind(kind: &EncoderKind) -> Option<InverseFn<'_>> {
    match kind {
        EncoderKind::Affine(map) => {
            let inv = map.inverse.as_ref()?;
            Some(Box::new(move |z| Some(inv * (z - &map.offset))))
        }
        EncoderKind::ScaledAffine { scale, offset } if *scale != 0.0 => {
            Some(Box::new(move |z| Some((z - offset) / *scale)))
        }
        EncoderKind::SmoothBijection(map) => {
            let inv = map.inverse.as_ref()?;
            Some(Box::new(move |z| {
                if z.iter().any(|v| v.abs() >= 1.0) {
                    return None;
                }
                Some(inv * (z.map(f64::atanh) - &map.offset))
            }))
        }
        EncoderKind::Collapsing { keep } => {
            // only the degenerate "keep everything" projection is invertible
            if keep.iter().enumerate().all(|(i, &k)| i == k) {
                Some(Box::new(|z| Some(z.clone())))
            } else {
                None
            }
        }
        EncoderKind::Noisy { sigma, inner } if *sigma == 0.0 => invert_kind(inner),
        _ => None,
    }
}

fn parse_matrix(v: &Value, name: &str, dim: usize, field: &dyn Fn(&str) -> String) -> Result<DMatrix<f64>> {
    if v.is_null() {
        return Ok(DMatrix::identity(dim, dim));
    }
    let rows: Vec<Vec<f64>> =
        serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("{}: {e}", field(name))))?;
    let m = matrix_from_rows(&rows).map_err(|e| Error::Config(format!("{}: {e}", field(name))))?;
    if m.shape() != (dim, dim) {
        return Err(Error::Config(format!("{} must be {dim}x{dim}", field(name))));
    }
    Ok(m)
}

fn parse_vector(v: &Value, name: &str, dim: usize, field: &dyn Fn(&str) -> String) -> Result<DVector<f64>> {
    if v.is_null() {
        return Ok(DVector::zeros(dim));
    }
    let xs: Vec<f64> = serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("{}: {e}", field(name))))?;
    if xs.len() != dim {
        return Err(Error::Config(format!("{} must have {dim} entries", field(name))));
    }
    Ok(DVector::from_vec(xs))
}

fn parse_indices(v: &Value, name: &str, default: Vec<usize>, field: &dyn Fn(&str) -> String) -> Result<Vec<usize>> {
    if v.is_null() {
        return Ok(default);
    }
    serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("{}: {e}", field(name))))
}

fn parse_f64(v: &Value, name: &str, default: Option<f64>, field: &dyn Fn(&str) -> String) -> Result<f64> {
    match (v.as_f64(), default) {
        (Some(x), _) => Ok(x),
        (None, Some(d)) if v.is_null() => Ok(d),
        _ => Err(Error::Config(format!("{} must be a number", field(name)))),
    }
}

fn kind_from_params(
    kind: &str,
    params: &Value,
    dim: usize,
    seed: u64,
    field: &dyn Fn(&str) -> String,
) -> Result<EncoderKind> {
    let p = |k: &str| params.get(k).cloned().unwrap_or(Value::Null);
    if !(params.is_null() || params.is_object()) {
        return Err(Error::Config(format!("{} must be an object", field("params"))));
    }
    Ok(match kind {
        "identity" => EncoderKind::Affine(AffineMap::new(DMatrix::identity(dim, dim), DVector::zeros(dim))?),
        "affine" => EncoderKind::Affine(AffineMap::new(
            parse_matrix(&p("matrix"), "matrix", dim, field)?,
            parse_vector(&p("offset"), "offset", dim, field)?,
        )?),
        "scaled-affine" => EncoderKind::ScaledAffine {
            scale: parse_f64(&p("scale"), "scale", None, field)?,
            offset: parse_vector(&p("offset"), "offset", dim, field)?,
        },
        "smooth-bijection" => EncoderKind::SmoothBijection(AffineMap::new(
            parse_matrix(&p("matrix"), "matrix", dim, field)?,
            parse_vector(&p("offset"), "offset", dim, field)?,
        )?),
        "collapsing-projection" => {
            let drop = parse_indices(&p("drop"), "drop", (dim / 2..dim).collect(), field)?;
            EncoderSpec::collapsing(dim, &drop)?.kind
        }
        "folding" => {
            let coords = parse_indices(&p("coordinates"), "coordinates", vec![0], field)?;
            let threshold = parse_f64(&p("threshold"), "threshold", Some(0.0), field)?;
            EncoderSpec::folding(dim, &coords, threshold)?.kind
        }
        "additive-noise" => {
            let sigma = parse_f64(&p("sigma"), "sigma", None, field)?;
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::Config(format!("{} must be ≥ 0", field("sigma"))));
            }
            let inner = p("inner");
            let inner_kind = inner
                .get("kind")
                .and_then(Value::as_str)
                .unwrap_or("identity")
                .to_owned();
            let inner_params = inner.get("params").cloned().unwrap_or(Value::Null);
            let nested = |name: &str| field(&format!("inner.params.{name}"));
            EncoderKind::Noisy {
                sigma,
                inner: Box::new(kind_from_params(&inner_kind, &inner_params, dim, seed, &nested)?),
            }
        }
        "random-mlp" => {
            let hidden = parse_indices(&p("hidden"), "hidden", vec![32], field)?;
            let out = match p("output_dim") {
                Value::Null => dim,
                v => v
                    .as_u64()
                    .ok_or_else(|| Error::Config(format!("{} must be an integer", field("output_dim"))))?
                    as usize,
            };
            EncoderSpec::random_mlp(dim, &hidden, out, seed)?.kind
        }
        other => {
            return Err(Error::Config(format!(
                "unknown encoder kind `{other}` (expected identity, affine, scaled-affine, \
                 smooth-bijection, collapsing-projection, folding, additive-noise or random-mlp)"
            )))
        }
    })
}
