//! Binary model container.
//!
//! All integers are little-endian `u32`, all reals little-endian `f64`.
//!
//! ```text
//! magic        4 bytes  "RTEQ"
//! version      u32      1
//! kind         u8       0 = mlp, 1 = forest
//! input_dim    u32
//! output_dim   u32
//!
//! mlp:     n_layers u32, then per layer
//!            input u32, output u32, activation u8 (0 identity, 1 logistic),
//!            weights f64 × input·output (input-major), bias f64 × output
//! forest:  n_estimators u32, then per estimator and output dimension
//!            n_nodes u32, then per node
//!              feature u32 (0xFFFFFFFF = leaf), left u32, right u32,
//!              threshold f64, value f64
//! ```

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::forest::{Forest, Node, Tree};
use super::mlp::{Activation, Layer, Mlp};
use super::KernelModel;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RTEQ";
pub const VERSION: u32 = 1;

const KIND_MLP: u8 = 0;
const KIND_FOREST: u8 = 1;

pub fn encode(model: &KernelModel) -> Vec<u8> {
    let mut out = Vec::new();
    write_model(&mut out, model).expect("writing to a Vec cannot fail");
    out
}

fn write_model<W: Write>(w: &mut W, model: &KernelModel) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LE>(VERSION)?;
    match model {
        KernelModel::Mlp(net) => {
            w.write_u8(KIND_MLP)?;
            w.write_u32::<LE>(net.input_dim() as u32)?;
            w.write_u32::<LE>(net.output_dim() as u32)?;
            w.write_u32::<LE>(net.layers().len() as u32)?;
            for l in net.layers() {
                w.write_u32::<LE>(l.input as u32)?;
                w.write_u32::<LE>(l.output as u32)?;
                w.write_u8(match l.activation {
                    Activation::Identity => 0,
                    Activation::Logistic => 1,
                })?;
                for &v in l.weights.iter().chain(&l.bias) {
                    w.write_f64::<LE>(v)?;
                }
            }
        }
        KernelModel::Forest(f) => {
            w.write_u8(KIND_FOREST)?;
            w.write_u32::<LE>(f.input_dim() as u32)?;
            w.write_u32::<LE>(f.output_dim() as u32)?;
            w.write_u32::<LE>(f.estimators().len() as u32)?;
            for tree in f.trees() {
                w.write_u32::<LE>(tree.nodes().len() as u32)?;
                for n in tree.nodes() {
                    w.write_u32::<LE>(n.feature)?;
                    w.write_u32::<LE>(n.left)?;
                    w.write_u32::<LE>(n.right)?;
                    w.write_f64::<LE>(n.threshold)?;
                    w.write_f64::<LE>(n.value)?;
                }
            }
        }
    }
    Ok(())
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

struct Reader<'a> {
    cur: Cursor<&'a [u8]>,
}

impl Reader<'_> {
    fn remaining(&self) -> usize {
        self.cur.get_ref().len() - self.cur.position() as usize
    }

    fn eof(_: std::io::Error) -> Error {
        format_err("model file is truncated")
    }

    fn u8(&mut self) -> Result<u8> {
        self.cur.read_u8().map_err(Self::eof)
    }

    fn u32(&mut self) -> Result<u32> {
        self.cur.read_u32::<LE>().map_err(Self::eof)
    }

    fn dim(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    /// Reads `n` reals, refusing counts the remaining bytes cannot hold.
    fn reals(&mut self, n: usize) -> Result<Vec<f64>> {
        if n.checked_mul(8).is_none_or(|b| b > self.remaining()) {
            return Err(format_err("model file is truncated"));
        }
        let mut v = vec![0.0; n];
        self.cur.read_f64_into::<LE>(&mut v).map_err(Self::eof)?;
        Ok(v)
    }

    /// Guards a declared element count against the bytes left.
    fn check_count(&self, n: usize, min_bytes_each: usize) -> Result<()> {
        if n.saturating_mul(min_bytes_each) > self.remaining() {
            return Err(format_err("model file is truncated"));
        }
        Ok(())
    }
}

pub fn decode(bytes: &[u8]) -> Result<KernelModel> {
    let mut r = Reader {
        cur: Cursor::new(bytes),
    };
    let mut magic = [0u8; 4];
    r.cur.read_exact(&mut magic).map_err(Reader::eof)?;
    if &magic != MAGIC {
        return Err(format_err("not a model file (bad magic)"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format_err(format!("unsupported model version {version}")));
    }
    let kind = r.u8()?;
    let input_dim = r.dim()?;
    let output_dim = r.dim()?;
    let model = match kind {
        KIND_MLP => {
            let n_layers = r.dim()?;
            r.check_count(n_layers, 9)?;
            let mut layers = Vec::with_capacity(n_layers);
            for _ in 0..n_layers {
                let input = r.dim()?;
                let output = r.dim()?;
                let activation = match r.u8()? {
                    0 => Activation::Identity,
                    1 => Activation::Logistic,
                    a => return Err(format_err(format!("unknown activation tag {a}"))),
                };
                let count = input
                    .checked_mul(output)
                    .ok_or_else(|| format_err("layer size overflows"))?;
                let weights = r.reals(count)?;
                let bias = r.reals(output)?;
                layers.push(Layer {
                    input,
                    output,
                    activation,
                    weights,
                    bias,
                });
            }
            let net = Mlp::from_layers(layers).map_err(|e| format_err(e.to_string()))?;
            if net.input_dim() != input_dim || net.output_dim() != output_dim {
                return Err(format_err("layer sizes disagree with header dims"));
            }
            KernelModel::Mlp(net)
        }
        KIND_FOREST => {
            let n_est = r.dim()?;
            r.check_count(n_est.saturating_mul(output_dim), 4)?;
            let mut estimators = Vec::with_capacity(n_est);
            for _ in 0..n_est {
                let mut trees = Vec::with_capacity(output_dim);
                for _ in 0..output_dim {
                    let n_nodes = r.dim()?;
                    r.check_count(n_nodes, 28)?;
                    let mut nodes = Vec::with_capacity(n_nodes);
                    for _ in 0..n_nodes {
                        let feature = r.u32()?;
                        let left = r.u32()?;
                        let right = r.u32()?;
                        let v = r.reals(2)?;
                        nodes.push(Node {
                            feature,
                            threshold: v[0],
                            left,
                            right,
                            value: v[1],
                        });
                    }
                    trees.push(
                        Tree::from_nodes(nodes, input_dim).map_err(|e| format_err(e.to_string()))?,
                    );
                }
                estimators.push(trees);
            }
            KernelModel::Forest(
                Forest::from_estimators(input_dim, output_dim, estimators)
                    .map_err(|e| format_err(e.to_string()))?,
            )
        }
        k => return Err(format_err(format!("unknown model kind tag {k}"))),
    };
    if r.remaining() != 0 {
        return Err(format_err("trailing bytes after model payload"));
    }
    Ok(model)
}

pub fn save(model: &KernelModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode(model))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<KernelModel> {
    decode(&fs::read(path)?)
}
