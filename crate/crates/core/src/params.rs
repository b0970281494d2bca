//! Latent parameter blocks and their flat coordinate layout.
//!
//! A parameter vector is stored flat as
//! `[theta (I x K) | gamma (P x K) | lambda (P x K) | rho (P x K)]`, where
//! `P` is the total product count and each K-vector is contiguous. The
//! `rho` block is absent for the static model. The same layout indexes
//! variational means, log standard deviations and gradients.

use serde::{Deserialize, Serialize};

use crate::data::Dims;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dynamic,
    Static,
}

impl ModelKind {
    pub fn has_inertia(self) -> bool {
        matches!(self, ModelKind::Dynamic)
    }

    pub fn n_loading_blocks(self) -> usize {
        if self.has_inertia() {
            3
        } else {
            2
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Dynamic => "dynamic",
            ModelKind::Static => "static",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dynamic" => Ok(ModelKind::Dynamic),
            "static" => Ok(ModelKind::Static),
            other => Err(Error::config("model", format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Theta,
    Gamma,
    Lambda,
    Rho,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub n_consumers: usize,
    pub n_products: usize,
    pub n_factors: usize,
    pub kind: ModelKind,
}

impl Layout {
    pub fn new(dims: &Dims, kind: ModelKind) -> Self {
        Layout {
            n_consumers: dims.n_consumers,
            n_products: dims.total_products(),
            n_factors: dims.n_factors,
            kind,
        }
    }

    pub fn len(&self) -> usize {
        self.n_factors * (self.n_consumers + self.kind.n_loading_blocks() * self.n_products)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn block_start(&self, block: Block) -> Option<usize> {
        let k = self.n_factors;
        let loadings = self.n_consumers * k;
        let block_len = self.n_products * k;
        match block {
            Block::Theta => Some(0),
            Block::Gamma => Some(loadings),
            Block::Lambda => Some(loadings + block_len),
            Block::Rho if self.kind.has_inertia() => Some(loadings + 2 * block_len),
            Block::Rho => None,
        }
    }

    /// Offset of the K-vector of `unit` (consumer for theta, global product
    /// otherwise).
    #[inline]
    pub fn offset(&self, block: Block, unit: usize) -> usize {
        self.block_start(block).expect("block present in layout") + unit * self.n_factors
    }

    /// Flat coordinate of `(block, unit, factor)`.
    pub fn coord(&self, block: Block, unit: usize, factor: usize) -> Option<usize> {
        let units = match block {
            Block::Theta => self.n_consumers,
            _ => self.n_products,
        };
        if unit >= units || factor >= self.n_factors {
            return None;
        }
        self.block_start(block)
            .map(|s| s + unit * self.n_factors + factor)
    }

    /// Inverse of [`Layout::coord`].
    pub fn locate(&self, coord: usize) -> Option<(Block, usize, usize)> {
        if coord >= self.len() {
            return None;
        }
        let k = self.n_factors;
        let theta_len = self.n_consumers * k;
        if coord < theta_len {
            return Some((Block::Theta, coord / k, coord % k));
        }
        let rest = coord - theta_len;
        let block_len = self.n_products * k;
        let block = match rest / block_len {
            0 => Block::Gamma,
            1 => Block::Lambda,
            _ => Block::Rho,
        };
        let within = rest % block_len;
        Some((block, within / k, within % k))
    }

    pub fn blocks(&self) -> Vec<Block> {
        let mut b = vec![Block::Theta, Block::Gamma, Block::Lambda];
        if self.kind.has_inertia() {
            b.push(Block::Rho);
        }
        b
    }
}

/// One point in parameter space: true simulator parameters, a variational
/// draw or a gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamDraw {
    pub layout: Layout,
    pub values: Vec<f64>,
}

impl ParamDraw {
    pub fn zeros(layout: Layout) -> Self {
        ParamDraw {
            values: vec![0.0; layout.len()],
            layout,
        }
    }

    pub fn from_values(layout: Layout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::dimension("parameter vector", layout.len(), values.len()));
        }
        Ok(ParamDraw { layout, values })
    }

    pub fn kind(&self) -> ModelKind {
        self.layout.kind
    }

    #[inline]
    pub fn theta(&self, consumer: usize) -> &[f64] {
        self.slice(Block::Theta, consumer)
    }

    #[inline]
    pub fn gamma(&self, product: usize) -> &[f64] {
        self.slice(Block::Gamma, product)
    }

    #[inline]
    pub fn lambda(&self, product: usize) -> &[f64] {
        self.slice(Block::Lambda, product)
    }

    #[inline]
    pub fn rho(&self, product: usize) -> Option<&[f64]> {
        self.layout
            .kind
            .has_inertia()
            .then(|| self.slice(Block::Rho, product))
    }

    #[inline]
    pub fn slice(&self, block: Block, unit: usize) -> &[f64] {
        let o = self.layout.offset(block, unit);
        &self.values[o..o + self.layout.n_factors]
    }

    #[inline]
    pub fn slice_mut(&mut self, block: Block, unit: usize) -> &mut [f64] {
        let o = self.layout.offset(block, unit);
        let k = self.layout.n_factors;
        &mut self.values[o..o + k]
    }

    /// Drops the inertia block, giving the static-model parameters.
    pub fn to_static(&self) -> ParamDraw {
        let layout = Layout {
            kind: ModelKind::Static,
            ..self.layout
        };
        ParamDraw {
            values: self.values[..layout.len()].to_vec(),
            layout,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// JSON form: row-major nested arrays; `theta` is I x K, loading blocks
/// are K x P (one row per factor, one column per global product).
#[derive(Serialize, Deserialize)]
struct ParamDrawJson {
    kind: ModelKind,
    n_factors: usize,
    theta: Vec<Vec<f64>>,
    gamma: Vec<Vec<f64>>,
    lambda: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho: Option<Vec<Vec<f64>>>,
}

impl Serialize for ParamDraw {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let l = self.layout;
        let block = |b: Block| -> Vec<Vec<f64>> {
            (0..l.n_factors)
                .map(|k| (0..l.n_products).map(|p| self.slice(b, p)[k]).collect())
                .collect()
        };
        ParamDrawJson {
            kind: l.kind,
            n_factors: l.n_factors,
            theta: (0..l.n_consumers).map(|i| self.theta(i).to_vec()).collect(),
            gamma: block(Block::Gamma),
            lambda: block(Block::Lambda),
            rho: l.kind.has_inertia().then(|| block(Block::Rho)),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ParamDraw {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = ParamDrawJson::deserialize(d)?;
        let k = raw.n_factors;
        let n_products = raw.gamma.first().map_or(0, |r| r.len());
        let layout = Layout {
            n_consumers: raw.theta.len(),
            n_products,
            n_factors: k,
            kind: raw.kind,
        };
        let mut draw = ParamDraw::zeros(layout);
        for (i, row) in raw.theta.iter().enumerate() {
            if row.len() != k {
                return Err(D::Error::custom(format!("theta row {i} has length {}", row.len())));
            }
            draw.slice_mut(Block::Theta, i).copy_from_slice(row);
        }
        let mut fill = |b: Block, m: &Vec<Vec<f64>>| -> std::result::Result<(), D::Error> {
            if m.len() != k || m.iter().any(|r| r.len() != n_products) {
                return Err(D::Error::custom(format!("{b:?} block must be {k} x {n_products}")));
            }
            for (f, row) in m.iter().enumerate() {
                for (p, v) in row.iter().enumerate() {
                    draw.slice_mut(b, p)[f] = *v;
                }
            }
            Ok(())
        };
        fill(Block::Gamma, &raw.gamma)?;
        fill(Block::Lambda, &raw.lambda)?;
        match (raw.kind, &raw.rho) {
            (ModelKind::Dynamic, Some(r)) => fill(Block::Rho, r)?,
            (ModelKind::Dynamic, None) => return Err(D::Error::custom("dynamic draw needs rho")),
            (ModelKind::Static, Some(_)) => return Err(D::Error::custom("static draw has rho")),
            (ModelKind::Static, None) => {}
        }
        Ok(draw)
    }
}
