//! Synthetic constitutive laws used as regression targets.
//!
//! Each case draws a tensor tuple from a seeded stream and evaluates an
//! analytic, rotation-equivariant law on it.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{invalid, Error, Result};
use crate::linalg::random_rotation;
use crate::standardize::standardize_tuple;
use crate::tensor::ShapeMeta;
use crate::{Rot, Tensor, Tuple};

/// LES closure constants.
pub const LES_CS: f64 = 0.4;
pub const LES_DELTA: f64 = 0.4;
pub const LES_C1: f64 = 1.0;
pub const LES_C2: f64 = 1.0;

pub const TRAIN_FRACTION: f64 = 0.85;
pub const DEFAULT_ROTATION_COUNT: usize = 10_000;

// Reserved stream ids; sample `i` uses stream `i`.
const SPLIT_STREAM: u64 = u64::MAX;
const EVAL_BASE_STREAM: u64 = u64::MAX - 1;
const EVAL_ROTATION_STREAM: u64 = u64::MAX - 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    Newtonian,
    Les,
    ThirdOrder,
    Electrostriction,
}

impl CaseKind {
    pub const ALL: [CaseKind; 4] = [
        CaseKind::Newtonian,
        CaseKind::Les,
        CaseKind::ThirdOrder,
        CaseKind::Electrostriction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CaseKind::Newtonian => "newtonian",
            CaseKind::Les => "les",
            CaseKind::ThirdOrder => "third_order",
            CaseKind::Electrostriction => "electrostriction",
        }
    }
}

impl fmt::Display for CaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CaseKind::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| invalid!("unknown case {s:?}"))
    }
}

/// A case plus its free coefficient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Case {
    pub kind: CaseKind,
    /// Viscosity-like coefficient of the Newtonian and third-order laws.
    pub mu: f64,
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn normal_tensor<R: Rng + ?Sized>(order: usize, rng: &mut R) -> Tensor {
    let data = (0..3usize.pow(order as u32)).map(|_| normal(rng)).collect();
    Tensor::new(order, 3, data).expect("consistent length")
}

fn delta(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

impl Case {
    pub fn new(kind: CaseKind) -> Self {
        Self { kind, mu: 1.0 }
    }

    pub fn with_mu(kind: CaseKind, mu: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(invalid!("mu must be finite"));
        }
        Ok(Self { kind, mu })
    }

    pub fn input_meta(&self) -> ShapeMeta {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect();
        let t = |v: &[(&str, usize)]| v.iter().map(|(n, k)| (n.to_string(), *k)).collect();
        match self.kind {
            CaseKind::Newtonian => ShapeMeta {
                scalars: s(&["p"]),
                tensors: t(&[("S", 2)]),
                anchor: "S".into(),
            },
            CaseKind::Les => ShapeMeta {
                scalars: vec![],
                tensors: t(&[("G", 2)]),
                anchor: "G".into(),
            },
            CaseKind::ThirdOrder => ShapeMeta {
                scalars: s(&["p"]),
                tensors: t(&[("A", 3)]),
                anchor: "A".into(),
            },
            // V anchors the frame: S = s sᵀ is rank one and never has a
            // unique eigenbasis.
            CaseKind::Electrostriction => ShapeMeta {
                scalars: vec![],
                tensors: t(&[("V", 4), ("S", 2)]),
                anchor: "V".into(),
            },
        }
    }

    pub fn label_order(&self) -> usize {
        match self.kind {
            CaseKind::ThirdOrder => 3,
            _ => 2,
        }
    }

    pub fn label_name(&self) -> &'static str {
        match self.kind {
            CaseKind::Newtonian | CaseKind::ThirdOrder => "sigma",
            CaseKind::Les => "tau",
            CaseKind::Electrostriction => "T",
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_meta().flat_len()
    }

    pub fn output_dim(&self) -> usize {
        3usize.pow(self.label_order() as u32)
    }

    /// Draws one input tuple.
    pub fn sample_input<R: Rng + ?Sized>(&self, rng: &mut R) -> Tuple {
        let tuple = match self.kind {
            CaseKind::Newtonian => {
                let grad = normal_tensor(2, rng);
                let p = normal(rng);
                let g = grad.as_matrix3().expect("order 2");
                let s = Tensor::matrix(std::array::from_fn(|i| {
                    std::array::from_fn(|j| g[i][j] + g[j][i])
                }));
                Tuple::new(vec![("p".into(), p)], vec![("S".into(), s)], "S")
            }
            CaseKind::Les => {
                let raw = normal_tensor(2, rng).as_matrix3().expect("order 2");
                let tr = (raw[0][0] + raw[1][1] + raw[2][2]) / 3.0;
                let g = Tensor::matrix(std::array::from_fn(|i| {
                    std::array::from_fn(|j| raw[i][j] - tr * delta(i, j))
                }));
                Tuple::new(vec![], vec![("G".into(), g)], "G")
            }
            CaseKind::ThirdOrder => {
                let a = normal_tensor(3, rng).symmetrize().expect("order 3");
                let p = normal(rng);
                Tuple::new(vec![("p".into(), p)], vec![("A".into(), a)], "A")
            }
            CaseKind::Electrostriction => {
                let s: [f64; 3] = std::array::from_fn(|_| normal(rng));
                let v = normal_tensor(4, rng).symmetrize().expect("order 4");
                let ss = Tensor::matrix(std::array::from_fn(|i| std::array::from_fn(|j| s[i] * s[j])));
                Tuple::new(vec![], vec![("V".into(), v), ("S".into(), ss)], "V")
            }
        };
        tuple.expect("tuple layout is fixed per case")
    }

    /// Evaluates the case law on an input tuple.
    pub fn label(&self, x: &Tuple) -> Result<Tensor> {
        let get = |name: &str| {
            x.tensor(name)
                .ok_or_else(|| invalid!("{} input lacks tensor {name:?}", self.kind))
        };
        let scalar = |name: &str| {
            x.scalar(name)
                .ok_or_else(|| invalid!("{} input lacks scalar {name:?}", self.kind))
        };
        match self.kind {
            CaseKind::Newtonian => {
                let s = get("S")?.as_matrix3().ok_or_else(|| invalid!("S must be 3×3"))?;
                let p = scalar("p")?;
                Ok(Tensor::matrix(std::array::from_fn(|i| {
                    std::array::from_fn(|j| -p * delta(i, j) + self.mu * s[i][j])
                })))
            }
            CaseKind::Les => {
                let g = get("G")?.as_matrix3().ok_or_else(|| invalid!("G must be 3×3"))?;
                Ok(Tensor::matrix(les_stress(&g)))
            }
            CaseKind::ThirdOrder => {
                let a = get("A")?;
                if a.order() != 3 {
                    return Err(invalid!("A must have order 3"));
                }
                let p = scalar("p")?;
                // Trace vector v_k = A_mmk.
                let v: [f64; 3] =
                    std::array::from_fn(|k| (0..3).map(|m| a.get(&[m, m, k])).sum());
                Tensor::from_fn(3, 3, |ix| {
                    let (i, j, k) = (ix[0], ix[1], ix[2]);
                    let iso = (delta(i, j) * v[k] + delta(j, k) * v[i] + delta(i, k) * v[j]) / 3.0;
                    self.mu * a.get(ix) - p * iso
                })
            }
            CaseKind::Electrostriction => {
                let v = get("V")?;
                let s = get("S")?;
                if v.order() != 4 || s.order() != 2 {
                    return Err(invalid!("V must have order 4 and S order 2"));
                }
                let vd = v.data();
                let sd = s.data();
                Tensor::from_fn(2, 3, |ix| {
                    let base = (ix[0] * 3 + ix[1]) * 9;
                    (0..9).map(|kl| vd[base + kl] * sd[kl]).sum()
                })
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Tuple, Tensor)> {
        let x = self.sample_input(rng);
        let y = self.label(&x)?;
        Ok((x, y))
    }

    /// Generates `n` samples with per-sample streams of `seed` and a seeded
    /// 85/15 split.
    pub fn generate(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(invalid!("dataset size must be >= 1"));
        }
        let (d_in, d_out) = (self.input_dim(), self.output_dim());
        let mut features = Vec::with_capacity(n * d_in);
        let mut labels = Vec::with_capacity(n * d_out);
        for i in 0..n {
            let mut rng = stream(seed, i as u64);
            let (x, y) = self.sample(&mut rng)?;
            features.extend(x.flatten());
            labels.extend_from_slice(y.data());
        }
        let (train, test) = split_indices(n, seed);
        Dataset::new(*self, seed, features, labels, train, test)
    }
}

pub(crate) fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Seeded permutation of `0..n`; the first `round(0.85 n)` entries train.
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream(seed, SPLIT_STREAM));
    let n_train = (TRAIN_FRACTION * n as f64).round() as usize;
    let test = idx.split_off(n_train);
    (idx, test)
}

/// Subgrid stress of the LES closure for a velocity gradient `g`.
pub fn les_stress(g: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let s: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| 0.5 * (g[i][j] + g[j][i])));
    let w: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| 0.5 * (g[i][j] - g[j][i])));
    let ss: f64 = s.iter().flatten().map(|v| v * v).sum();
    let mag = 2.0 * (2.0 * ss).sqrt();
    let pre = -(LES_CS * LES_DELTA).powi(2);
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let mut s2 = 0.0;
            let mut comm = 0.0;
            for k in 0..3 {
                s2 += s[i][k] * s[k][j];
                comm += s[i][k] * w[k][j] - w[i][k] * s[k][j];
            }
            pre * (mag * s[i][j] + LES_C1 * (s2 - ss / 3.0 * delta(i, j)) + LES_C2 * comm)
        })
    })
}

/// One base sample and a set of rotations applied to it.
#[derive(Clone, Debug)]
pub struct RotationEvalSet {
    pub case: Case,
    pub base_input: Tuple,
    pub base_label: Tensor,
    pub rotations: Vec<Rot>,
    pub seed: u64,
}

impl RotationEvalSet {
    pub fn len(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotations.is_empty()
    }

    /// The `i`-th rotated input and label.
    pub fn rotated(&self, i: usize) -> Result<(Tuple, Tensor)> {
        let r = &self.rotations[i];
        Ok((self.base_input.rotate(r)?, self.base_label.rotate(r)?))
    }
}

/// Draws a base sample whose standard frame is non-degenerate, plus
/// `count` Haar-uniform rotations.
pub fn build_rotation_eval(case: &Case, seed: u64, count: usize) -> Result<RotationEvalSet> {
    if count == 0 {
        return Err(invalid!("rotation count must be >= 1"));
    }
    let mut rng = stream(seed, EVAL_BASE_STREAM);
    let (base_input, base_label) = loop {
        let (x, y) = case.sample(&mut rng)?;
        if !standardize_tuple(&x)?.degenerate() {
            break (x, y);
        }
    };
    let mut rot_rng = stream(seed, EVAL_ROTATION_STREAM);
    let rotations = (0..count).map(|_| random_rotation(&mut rot_rng)).collect();
    Ok(RotationEvalSet {
        case: *case,
        base_input,
        base_label,
        rotations,
        seed,
    })
}
