use std::io::{Read, Write};

use rand::Rng;

use super::config::EncoderConfig;
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Scalar};

/// Names and widths the parameters must line up with.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelSchema {
    /// Node type name and raw feature width; `None` for featureless types.
    pub node_types: Vec<(String, Option<usize>)>,
    /// Labels of the relations messages are passed along.
    pub relations: Vec<String>,
    /// Labels of the relations the decoder scores.
    pub targets: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams<T: Scalar = f32> {
    /// One weight per message relation, keyed by relation label.
    pub relations: Vec<(String, DenseMatrix<T>)>,
    /// Learned self-transform of the RGCN variant.
    pub self_weight: Option<DenseMatrix<T>>,
}

impl<T: Scalar> LayerParams<T> {
    pub fn weight(&self, label: &str) -> Option<&DenseMatrix<T>> {
        self.relations.iter().find(|(l, _)| l == label).map(|(_, w)| w)
    }
}

/// All learned tensors: input projections, per-layer relation weights and
/// per-target bilinear decoder forms.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T: Scalar = f32> {
    pub projections: Vec<(String, DenseMatrix<T>)>,
    pub layers: Vec<LayerParams<T>>,
    pub decoders: Vec<(String, DenseMatrix<T>)>,
}

fn glorot<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix<T> {
    let bound = glorot_bound(rows, cols);
    DenseMatrix::from_fn(rows, cols, |_, _| T::of(rng.gen_range(-bound..=bound)))
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Glorot-uniform initialization in a fixed tensor order.
pub fn init_params<T: Scalar, R: Rng + ?Sized>(
    cfg: &EncoderConfig,
    schema: &ModelSchema,
    rng: &mut R,
) -> Result<ModelParams<T>> {
    cfg.validate()?;
    let d0 = cfg.layer_sizes[0];
    let projections = schema
        .node_types
        .iter()
        .filter_map(|(name, dim)| dim.map(|f| (name.clone(), f)))
        .map(|(name, f)| {
            if f == 0 {
                return Err(Error::Schema(format!("node type `{name}` has zero-width features")));
            }
            Ok((name, glorot(f, d0, rng)))
        })
        .collect::<Result<Vec<_>>>()?;
    let layers = (0..cfg.layer_sizes.len())
        .map(|l| {
            let (din, dout) = (cfg.layer_input(l), cfg.layer_sizes[l]);
            LayerParams {
                relations: schema
                    .relations
                    .iter()
                    .map(|label| (label.clone(), glorot(din, dout, rng)))
                    .collect(),
                self_weight: cfg.self_weight().then(|| glorot(din, dout, rng)),
            }
        })
        .collect();
    let d = cfg.output_dim();
    let decoders = schema
        .targets
        .iter()
        .map(|label| (label.clone(), glorot(d, d, rng)))
        .collect();
    Ok(ModelParams {
        projections,
        layers,
        decoders,
    })
}

impl<T: Scalar> ModelParams<T> {
    /// Same structure with every tensor zeroed.
    pub fn zeros_like(&self) -> Self {
        let z = |m: &DenseMatrix<T>| DenseMatrix::zeros(m.rows(), m.cols());
        Self {
            projections: self.projections.iter().map(|(n, m)| (n.clone(), z(m))).collect(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    relations: l.relations.iter().map(|(n, m)| (n.clone(), z(m))).collect(),
                    self_weight: l.self_weight.as_ref().map(z),
                })
                .collect(),
            decoders: self.decoders.iter().map(|(n, m)| (n.clone(), z(m))).collect(),
        }
    }

    pub fn projection(&self, node_type: &str) -> Option<&DenseMatrix<T>> {
        self.projections.iter().find(|(n, _)| n == node_type).map(|(_, m)| m)
    }

    pub fn decoder(&self, target: &str) -> Option<&DenseMatrix<T>> {
        self.decoders.iter().find(|(n, _)| n == target).map(|(_, m)| m)
    }

    /// Tensors with their checkpoint names, in canonical order.
    pub fn named_tensors(&self) -> Vec<(String, &DenseMatrix<T>)> {
        let mut out = Vec::new();
        for (n, m) in &self.projections {
            out.push((format!("proj.{n}"), m));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            for (n, m) in &layer.relations {
                out.push((format!("conv.{l}.{n}"), m));
            }
            if let Some(m) = &layer.self_weight {
                out.push((format!("self.{l}"), m));
            }
        }
        for (n, m) in &self.decoders {
            out.push((format!("dec.{n}"), m));
        }
        out
    }

    pub fn tensors(&self) -> Vec<&DenseMatrix<T>> {
        self.named_tensors().into_iter().map(|(_, m)| m).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix<T>> {
        let mut out: Vec<&mut DenseMatrix<T>> = Vec::new();
        out.extend(self.projections.iter_mut().map(|(_, m)| m));
        for layer in &mut self.layers {
            out.extend(layer.relations.iter_mut().map(|(_, m)| m));
            if let Some(m) = &mut layer.self_weight {
                out.push(m);
            }
        }
        out.extend(self.decoders.iter_mut().map(|(_, m)| m));
        out
    }

    pub fn num_tensors(&self) -> usize {
        self.tensors().len()
    }

    pub fn num_values(&self) -> usize {
        self.tensors().iter().map(|m| m.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            projections: self.projections.iter().map(|(n, m)| (n.clone(), m.cast())).collect(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    relations: l.relations.iter().map(|(n, m)| (n.clone(), m.cast())).collect(),
                    self_weight: l.self_weight.as_ref().map(DenseMatrix::cast),
                })
                .collect(),
            decoders: self.decoders.iter().map(|(n, m)| (n.clone(), m.cast())).collect(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors()
            .iter()
            .flat_map(|m| m.data().iter().map(|v| v.as_f64()))
            .collect()
    }

    /// Overwrites every value from a flat vector in canonical order.
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_values() {
            return Err(Error::Dimension(format!(
                "{} values for {} parameters",
                flat.len(),
                self.num_values()
            )));
        }
        let mut it = flat.iter();
        for m in self.tensors_mut() {
            for v in m.data_mut() {
                *v = T::of(*it.next().expect("length checked"));
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|m| m.is_finite())
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"HGEP";
const CHECKPOINT_VERSION: u32 = 1;

impl ModelParams<f32> {
    /// Writes the parameter checkpoint: magic, version, then named tensors.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        for (name, m) in self.named_tensors() {
            let bytes = name.as_bytes();
            let len = u16::try_from(bytes.len())
                .map_err(|_| Error::Parameter(format!("tensor name too long: {name}")))?;
            w.write_all(&len.to_le_bytes())?;
            w.write_all(bytes)?;
            w.write_all(&(m.rows() as u64).to_le_bytes())?;
            w.write_all(&(m.cols() as u64).to_le_bytes())?;
            for v in m.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let err = |location: String, message: String| Error::Load {
            file: "checkpoint".into(),
            location,
            message,
        };
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        if buf.len() < 8 || &buf[..4] != CHECKPOINT_MAGIC {
            return Err(err("byte 0".into(), "missing HGEP magic".into()));
        }
        let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(err("byte 4".into(), format!("unsupported version {version}")));
        }
        let mut params = ModelParams {
            projections: Vec::new(),
            layers: Vec::new(),
            decoders: Vec::new(),
        };
        let mut pos = 8;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
            if *pos + n > buf.len() {
                return Err(err(
                    format!("byte {pos}"),
                    format!("expected {n} more bytes, found {}", buf.len() - *pos),
                ));
            }
            let s = &buf[*pos..*pos + n];
            *pos += n;
            Ok(s)
        };
        while pos < buf.len() {
            let len = u16::from_le_bytes(take(&mut pos, 2)?.try_into().unwrap()) as usize;
            let name = String::from_utf8(take(&mut pos, len)?.to_vec())
                .map_err(|_| err(format!("byte {pos}"), "tensor name is not UTF-8".into()))?;
            let rows = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
            let cols = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
            let raw = take(&mut pos, rows * cols * 4)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let m = DenseMatrix::from_vec(rows, cols, data)?;
            params.insert_named(&name, m)?;
        }
        Ok(params)
    }

    fn insert_named(&mut self, name: &str, m: DenseMatrix<f32>) -> Result<()> {
        let bad = || Error::Load {
            file: "checkpoint".into(),
            location: format!("tensor `{name}`"),
            message: "unrecognized tensor name".into(),
        };
        let (kind, rest) = name.split_once('.').ok_or_else(bad)?;
        match kind {
            "proj" => self.projections.push((rest.to_string(), m)),
            "dec" => self.decoders.push((rest.to_string(), m)),
            "conv" | "self" => {
                let (layer, label) = match rest.split_once('.') {
                    Some((l, label)) => (l, Some(label)),
                    None => (rest, None),
                };
                let l: usize = layer.parse().map_err(|_| bad())?;
                while self.layers.len() <= l {
                    self.layers.push(LayerParams {
                        relations: Vec::new(),
                        self_weight: None,
                    });
                }
                match (kind, label) {
                    ("conv", Some(label)) => self.layers[l].relations.push((label.to_string(), m)),
                    ("self", None) => self.layers[l].self_weight = Some(m),
                    _ => return Err(bad()),
                }
            }
            _ => return Err(bad()),
        }
        Ok(())
    }
}
