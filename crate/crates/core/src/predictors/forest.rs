//! Depth-limited regression forest with squared-error splits.
//!
//! Each estimator draws one bootstrap sample and grows one tree per output
//! dimension on it. Trees are grown level by level over presorted feature
//! columns, so a level costs one pass over every column.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainingData;
use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub seed: u64,
    pub subsample_fraction: f64,
    /// Sample with replacement; otherwise draw without replacement.
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_depth: 3,
            seed: 0,
            subsample_fraction: 1.0,
            bootstrap: true,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(invalid!("n_estimators must be >= 1"));
        }
        if self.max_depth == 0 {
            return Err(invalid!("max_depth must be >= 1"));
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return Err(invalid!("subsample_fraction must lie in (0, 1]"));
        }
        Ok(())
    }
}

pub const LEAF: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    /// Split feature, or [`LEAF`].
    pub feature: u32,
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
    /// Mean label of the node's samples; the prediction at leaves.
    pub value: f64,
}

impl Node {
    fn leaf(value: f64) -> Self {
        Self {
            feature: LEAF,
            threshold: 0.0,
            left: 0,
            right: 0,
            value,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.feature == LEAF
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::leaf(value)],
        }
    }

    /// Builds a tree from raw nodes, checking that child links point forward
    /// and features are in range.
    pub fn from_nodes(nodes: Vec<Node>, input_dim: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(invalid!("tree has no nodes"));
        }
        for (i, n) in nodes.iter().enumerate() {
            if n.is_leaf() {
                continue;
            }
            let ok = (n.feature as usize) < input_dim
                && (n.left as usize) > i
                && (n.right as usize) > i
                && (n.left as usize) < nodes.len()
                && (n.right as usize) < nodes.len();
            if !ok {
                return Err(invalid!("malformed tree node {i}"));
            }
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn internal_nodes(&self) -> usize {
        self.nodes.iter().filter(|n| !n.is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            let n = &nodes[i];
            if n.is_leaf() {
                0
            } else {
                1 + go(nodes, n.left as usize).max(go(nodes, n.right as usize))
            }
        }
        go(&self.nodes, 0)
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            let n = &self.nodes[i];
            if n.is_leaf() {
                return n.value;
            }
            i = if x[n.feature as usize] <= n.threshold {
                n.left
            } else {
                n.right
            } as usize;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forest {
    input_dim: usize,
    output_dim: usize,
    /// `estimators[b][o]` is estimator `b`'s tree for output `o`.
    estimators: Vec<Vec<Tree>>,
}

impl Forest {
    pub fn from_estimators(
        input_dim: usize,
        output_dim: usize,
        estimators: Vec<Vec<Tree>>,
    ) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || estimators.is_empty() {
            return Err(invalid!("forest needs positive dims and at least one estimator"));
        }
        if estimators.iter().any(|e| e.len() != output_dim) {
            return Err(invalid!("every estimator needs one tree per output"));
        }
        Ok(Self {
            input_dim,
            output_dim,
            estimators,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn estimators(&self) -> &[Vec<Tree>] {
        &self.estimators
    }

    pub fn trees(&self) -> impl Iterator<Item = &Tree> {
        self.estimators.iter().flatten()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(invalid!(
                "input has length {}, model expects {}",
                x.len(),
                self.input_dim
            ));
        }
        let mut out = vec![0.0; self.output_dim];
        for est in &self.estimators {
            for (o, tree) in est.iter().enumerate() {
                out[o] += tree.predict(x);
            }
        }
        let n = self.estimators.len() as f64;
        out.iter_mut().for_each(|v| *v /= n);
        Ok(out)
    }
}

#[derive(Clone, Copy, Default)]
struct Stats {
    count: usize,
    sum: f64,
    sum_sq: f64,
}

impl Stats {
    fn push(&mut self, y: f64) {
        self.count += 1;
        self.sum += y;
        self.sum_sq += y * y;
    }

    fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    fn sse(&self) -> f64 {
        (self.sum_sq - self.sum * self.sum / self.count as f64).max(0.0)
    }
}

#[derive(Clone, Copy)]
struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

/// Per-node scan state while sweeping one sorted feature column.
#[derive(Clone, Copy, Default)]
struct Scan {
    left: Stats,
    last: f64,
}

/// Grows one tree on the sample rows `x` (`m × d`, row-major) with labels
/// `y`, using `sorted[f]`, the row order of feature `f`.
fn grow_tree(x: &[f64], y: &[f64], d: usize, sorted: &[Vec<u32>], max_depth: usize) -> Tree {
    const NONE: u32 = u32::MAX;
    let m = y.len();
    let mut root = Stats::default();
    y.iter().for_each(|&v| root.push(v));
    let mut nodes = vec![Node::leaf(root.mean())];
    let mut node_of = vec![0u32; m];
    // Active nodes at the current level, with their statistics.
    let mut active: Vec<(u32, Stats)> = vec![(0, root)];
    let mut slot = vec![NONE; 1];

    for _ in 0..max_depth {
        let tol = |s: &Stats| 1e-12 * s.sum_sq.max(f64::MIN_POSITIVE);
        active.retain(|(_, s)| s.count >= 2 && s.sse() > tol(s));
        if active.is_empty() {
            break;
        }
        slot.clear();
        slot.resize(nodes.len(), NONE);
        for (k, (id, _)) in active.iter().enumerate() {
            slot[*id as usize] = k as u32;
        }
        let mut best: Vec<Option<Split>> = vec![None; active.len()];
        let mut scan = vec![Scan::default(); active.len()];
        for (f, column) in sorted.iter().enumerate() {
            scan.iter_mut().for_each(|s| *s = Scan::default());
            for &p in column {
                let p = p as usize;
                let id = node_of[p];
                if id == NONE {
                    continue;
                }
                let k = slot[id as usize];
                if k == NONE {
                    continue;
                }
                let k = k as usize;
                let v = x[p * d + f];
                let st = &mut scan[k];
                if st.left.count > 0 && v > st.last {
                    let total = &active[k].1;
                    let nl = st.left.count as f64;
                    let nr = (total.count - st.left.count) as f64;
                    let sr = total.sum - st.left.sum;
                    let score = st.left.sum * st.left.sum / nl + sr * sr / nr;
                    if best[k].is_none_or(|b| score > b.score) {
                        let mut threshold = 0.5 * (st.last + v);
                        if threshold >= v {
                            threshold = st.last;
                        }
                        best[k] = Some(Split {
                            feature: f,
                            threshold,
                            score,
                        });
                    }
                }
                st.left.push(y[p]);
                st.last = v;
            }
        }

        let mut children: Vec<(u32, Stats)> = Vec::new();
        let mut split_of: Vec<Option<(Split, u32)>> = vec![None; nodes.len()];
        for (k, (id, _)) in active.iter().enumerate() {
            let Some(split) = best[k] else { continue };
            let left = nodes.len() as u32;
            nodes.push(Node::leaf(0.0));
            nodes.push(Node::leaf(0.0));
            let n = &mut nodes[*id as usize];
            n.feature = split.feature as u32;
            n.threshold = split.threshold;
            n.left = left;
            n.right = left + 1;
            split_of[*id as usize] = Some((split, left));
        }
        let mut child_stats = vec![Stats::default(); nodes.len()];
        for p in 0..m {
            let id = node_of[p];
            if id == NONE {
                continue;
            }
            match split_of.get(id as usize).copied().flatten() {
                Some((split, left)) => {
                    let c = if x[p * d + split.feature] <= split.threshold {
                        left
                    } else {
                        left + 1
                    };
                    node_of[p] = c;
                    child_stats[c as usize].push(y[p]);
                }
                None => node_of[p] = NONE,
            }
        }
        for (id, s) in child_stats.iter().enumerate() {
            if s.count > 0 {
                nodes[id].value = s.mean();
                children.push((id as u32, *s));
            }
        }
        active = children;
    }
    Tree { nodes }
}

pub fn train(data: &TrainingData<'_>, config: &ForestConfig) -> Result<Forest> {
    config.validate()?;
    let n = data.len();
    let (d, d_out) = (data.input_dim(), data.output_dim());
    let m = ((config.subsample_fraction * n as f64).round() as usize).clamp(1, n);
    let mut estimators = Vec::with_capacity(config.n_estimators);
    let mut x = vec![0.0; m * d];
    let mut y = vec![0.0; m];
    for b in 0..config.n_estimators {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(b as u64);
        let rows: Vec<usize> = if config.bootstrap {
            (0..m).map(|_| rng.random_range(0..n)).collect()
        } else {
            let mut all: Vec<usize> = (0..n).collect();
            if m < n {
                all.shuffle(&mut rng);
                all.truncate(m);
            }
            all
        };
        for (p, &r) in rows.iter().enumerate() {
            x[p * d..(p + 1) * d].copy_from_slice(data.feature_row(r));
        }
        let sorted: Vec<Vec<u32>> = (0..d)
            .map(|f| {
                let mut idx: Vec<u32> = (0..m as u32).collect();
                idx.sort_by(|&a, &b| {
                    x[a as usize * d + f]
                        .total_cmp(&x[b as usize * d + f])
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        let trees = (0..d_out)
            .map(|o| {
                for (p, &r) in rows.iter().enumerate() {
                    y[p] = data.label_row(r)[o];
                }
                grow_tree(&x, &y, d, &sorted, config.max_depth)
            })
            .collect();
        estimators.push(trees);
    }
    Forest::from_estimators(d, d_out, estimators)
}
