//! Dense tensors over ℝⁿ (almost always n = 3), the rotation action on
//! them, index contraction, symmetrization, and the flat feature-vector
//! form used by the predictors.
//!
//! Storage is row-major with the last index varying fastest, so the entry
//! `T[i1, …, ik]` lives at `Σ_m i_m · n^(k-1-m)`.
//!
//! Contraction axes are **1-based**: `contract(1, 2)` sums over the first two
//! indices, matching the usual `C(a, b)` notation.

use std::ops::Mul;

use itertools::Itertools;

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Largest order accepted by [`DenseTensor::symmetrize`].
pub const MAX_SYMMETRIZE_ORDER: usize = 6;

/// Order-k dense tensor over ℝⁿ.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor<T> {
    order: usize,
    dim: usize,
    data: Vec<T>,
    symmetric: bool,
}

fn checked_len(order: usize, dim: usize) -> Result<usize> {
    if dim == 0 {
        return Err(invalid!("tensor dimension must be positive"));
    }
    let mut len = 1usize;
    for _ in 0..order {
        len = len
            .checked_mul(dim)
            .ok_or_else(|| invalid!("tensor of order {order} over dim {dim} is too large"))?;
    }
    Ok(len)
}

impl<T: Real> DenseTensor<T> {
    pub fn new(order: usize, dim: usize, data: Vec<T>) -> Result<Self> {
        let len = checked_len(order, dim)?;
        if data.len() != len {
            return Err(invalid!(
                "order-{order} tensor over dim {dim} needs {len} entries, got {}",
                data.len()
            ));
        }
        Ok(Self {
            order,
            dim,
            data,
            symmetric: false,
        })
    }

    pub fn zeros(order: usize, dim: usize) -> Result<Self> {
        let len = checked_len(order, dim)?;
        Self::new(order, dim, vec![T::zero(); len])
    }

    pub fn scalar(value: T) -> Self {
        Self {
            order: 0,
            dim: 3,
            data: vec![value],
            symmetric: true,
        }
    }

    pub fn vector(v: [T; 3]) -> Self {
        Self {
            order: 1,
            dim: 3,
            data: v.to_vec(),
            symmetric: true,
        }
    }

    pub fn matrix(m: [[T; 3]; 3]) -> Self {
        Self {
            order: 2,
            dim: 3,
            data: m.iter().flatten().copied().collect(),
            symmetric: false,
        }
    }

    /// Builds a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(order: usize, dim: usize, mut f: impl FnMut(&[usize]) -> T) -> Result<Self> {
        let len = checked_len(order, dim)?;
        let mut idx = vec![0usize; order];
        let mut data = Vec::with_capacity(len);
        for lin in 0..len {
            decode(lin, dim, &mut idx);
            data.push(f(&idx));
        }
        Self::new(order, dim, data)
    }

    /// Order-k identity-like tensor `δ_{i1…ik}` (1 on the main diagonal).
    pub fn diagonal_unit(order: usize, dim: usize) -> Result<Self> {
        Self::from_fn(order, dim, |idx| {
            if idx.iter().all_equal() {
                T::one()
            } else {
                T::zero()
            }
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Advisory flag set on tensors constructed to be fully symmetric.
    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn with_symmetric_flag(mut self, symmetric: bool) -> Self {
        self.symmetric = symmetric;
        self
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order);
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn get(&self, idx: &[usize]) -> T {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: T) {
        let off = self.offset(idx);
        self.data[off] = value;
    }

    /// For an order-0 tensor, its single value.
    pub fn as_scalar(&self) -> Option<T> {
        (self.order == 0).then(|| self.data[0])
    }

    /// For an order-2 tensor over ℝ³, the 3×3 matrix.
    pub fn as_matrix3(&self) -> Option<[[T; 3]; 3]> {
        if self.order != 2 || self.dim != 3 {
            return None;
        }
        let d = &self.data;
        Some([[d[0], d[1], d[2]], [d[3], d[4], d[5]], [d[6], d[7], d[8]]])
    }

    /// For an order-1 tensor over ℝ³, the vector.
    pub fn as_vector3(&self) -> Option<[T; 3]> {
        if self.order != 1 || self.dim != 3 {
            return None;
        }
        Some([self.data[0], self.data[1], self.data[2]])
    }

    /// Frobenius norm.
    pub fn norm(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, &x| acc + x * x)
            .sqrt()
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &Self) -> Result<T> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
            .sqrt())
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.order != other.order || self.dim != other.dim {
            return Err(invalid!(
                "shape mismatch: order {} dim {} vs order {} dim {}",
                self.order,
                self.dim,
                other.order,
                other.dim
            ));
        }
        Ok(())
    }

    /// `a·self + b·other`, entrywise.
    pub fn lin_comb(&self, a: T, other: &Self, b: T) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&x, &y)| a * x + b * y)
            .collect();
        Ok(Self {
            order: self.order,
            dim: self.dim,
            data,
            symmetric: self.symmetric && other.symmetric,
        })
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            order: self.order,
            dim: self.dim,
            data: self.data.iter().map(|&x| x * s).collect(),
            symmetric: self.symmetric,
        }
    }

    /// Applies the induced action of `r` to every index:
    /// `T'_{i1…ik} = Σ R_{i1 j1}⋯R_{ik jk} T_{j1…jk}`.
    ///
    /// Computed as k successive mode products.
    pub fn rotate(&self, r: &Rotation<T>) -> Result<Self> {
        if self.dim != 3 {
            return Err(invalid!(
                "rotation acts on tensors over ℝ³, got dim {}",
                self.dim
            ));
        }
        let mut cur = self.data.clone();
        let mut next = vec![T::zero(); cur.len()];
        let len = cur.len();
        for axis in 0..self.order {
            let stride = 3usize.pow((self.order - 1 - axis) as u32);
            let block = stride * 3;
            for start in (0..len).step_by(block) {
                for s in 0..stride {
                    let base = start + s;
                    let x0 = cur[base];
                    let x1 = cur[base + stride];
                    let x2 = cur[base + 2 * stride];
                    for i in 0..3 {
                        let row = &r.m[i];
                        next[base + i * stride] = row[0] * x0 + row[1] * x1 + row[2] * x2;
                    }
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(Self {
            order: self.order,
            dim: 3,
            data: cur,
            symmetric: self.symmetric,
        })
    }

    /// Contracts axes `a` and `b` (1-based), reducing the order by two.
    /// The remaining indices keep their relative order.
    pub fn contract(&self, a: usize, b: usize) -> Result<Self> {
        let k = self.order;
        if k < 2 {
            return Err(invalid!("contraction needs order >= 2, got {k}"));
        }
        if a == b || a == 0 || b == 0 || a > k || b > k {
            return Err(invalid!(
                "invalid contraction axes ({a}, {b}) for order {k}"
            ));
        }
        let (a, b) = (a.min(b) - 1, a.max(b) - 1);
        let n = self.dim;
        let strides: Vec<usize> = (0..k).map(|m| n.pow((k - 1 - m) as u32)).collect();
        let diag_step = strides[a] + strides[b];
        let kept: Vec<usize> = (0..k).filter(|&m| m != a && m != b).collect();
        let out_len = n.pow((k - 2) as u32);
        let mut out_idx = vec![0usize; k - 2];
        let mut data = Vec::with_capacity(out_len);
        for lin in 0..out_len {
            decode(lin, n, &mut out_idx);
            let base: usize = kept
                .iter()
                .zip(&out_idx)
                .map(|(&axis, &i)| i * strides[axis])
                .sum();
            let mut acc = T::zero();
            for m in 0..n {
                acc += self.data[base + m * diag_step];
            }
            data.push(acc);
        }
        Ok(Self {
            order: k - 2,
            dim: n,
            data,
            symmetric: self.symmetric,
        })
    }

    /// Repeatedly contracts the first two axes until the order equals `target`.
    pub fn contract_to_order(&self, target: usize) -> Result<Self> {
        if self.order < target || (self.order - target) % 2 != 0 {
            return Err(invalid!(
                "cannot contract order {} down to {target}",
                self.order
            ));
        }
        let mut cur = self.clone();
        while cur.order > target {
            cur = cur.contract(1, 2)?;
        }
        Ok(cur)
    }

    /// Average over all `k!` permutations of the indices. The result is
    /// exactly symmetric: every entry of an index orbit holds the same value.
    pub fn symmetrize(&self) -> Result<Self> {
        let k = self.order;
        if k > MAX_SYMMETRIZE_ORDER {
            return Err(invalid!(
                "symmetrize supports order <= {MAX_SYMMETRIZE_ORDER}, got {k}"
            ));
        }
        if k < 2 {
            return Ok(self.clone().with_symmetric_flag(true));
        }
        let n = self.dim;
        let perms: Vec<Vec<usize>> = (0..k).permutations(k).collect();
        let count = T::from_usize(perms.len()).expect("permutation count");
        let mut out = vec![T::nan(); self.data.len()];
        let mut idx = vec![0usize; k];
        let mut permuted = vec![0usize; k];
        for lin in 0..self.data.len() {
            decode(lin, n, &mut idx);
            idx.sort_unstable();
            let key = self.offset(&idx);
            if out[key].is_nan() {
                let mut acc = T::zero();
                for p in &perms {
                    for (slot, &src) in permuted.iter_mut().zip(p) {
                        *slot = idx[src];
                    }
                    acc += self.data[self.offset(&permuted)];
                }
                out[key] = acc / count;
            }
            out[lin] = out[key];
        }
        Ok(Self {
            order: k,
            dim: n,
            data: out,
            symmetric: true,
        })
    }

    /// Checks invariance under every adjacent transposition of indices
    /// (which generate the full permutation group), relative to `‖T‖_F`.
    pub fn is_symmetric(&self, rel_tol: T) -> bool {
        let k = self.order;
        if k < 2 {
            return true;
        }
        let tol = rel_tol * self.norm();
        let n = self.dim;
        let mut idx = vec![0usize; k];
        for lin in 0..self.data.len() {
            decode(lin, n, &mut idx);
            for m in 0..k - 1 {
                if idx[m] < idx[m + 1] {
                    idx.swap(m, m + 1);
                    let other = self.data[self.offset(&idx)];
                    idx.swap(m, m + 1);
                    if (other - self.data[lin]).abs() > tol {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Contracts the last index with `v`: `(T·v)_{i1…i(k-1)} = Σ_j T_{i1…i(k-1) j} v_j`.
    pub fn contract_last_with(&self, v: &[T]) -> Result<Self> {
        if self.order == 0 || v.len() != self.dim {
            return Err(invalid!(
                "cannot contract order-{} tensor with a vector of length {}",
                self.order,
                v.len()
            ));
        }
        let n = self.dim;
        let data = self
            .data
            .chunks_exact(n)
            .map(|row| row.iter().zip(v).fold(T::zero(), |acc, (&a, &b)| acc + a * b))
            .collect();
        Self::new(self.order - 1, n, data)
    }

    /// Moves axis `axis` (0-based) to the last position.
    pub fn move_axis_last(&self, axis: usize) -> Result<Self> {
        let k = self.order;
        if axis >= k {
            return Err(invalid!("axis {axis} out of range for order {k}"));
        }
        let mut src = vec![0usize; k];
        Self::from_fn(k, self.dim, |idx| {
            // idx is in the permuted layout: original axis `axis` sits last.
            let mut j = 0;
            for (m, slot) in src.iter_mut().enumerate() {
                if m == axis {
                    *slot = idx[k - 1];
                } else {
                    *slot = idx[j];
                    j += 1;
                }
            }
            self.get(&src)
        })
        .map(|t| t.with_symmetric_flag(self.symmetric))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Converts the scalar type (e.g. `f64` → `f32`).
    pub fn cast<U: Real>(&self) -> DenseTensor<U> {
        DenseTensor {
            order: self.order,
            dim: self.dim,
            data: self
                .data
                .iter()
                .map(|x| U::from_f64(x.to_f64().unwrap_or(f64::NAN)).unwrap_or(U::nan()))
                .collect(),
            symmetric: self.symmetric,
        }
    }
}

/// Decodes a row-major linear index into a multi-index.
pub(crate) fn decode(mut lin: usize, dim: usize, idx: &mut [usize]) {
    for slot in idx.iter_mut().rev() {
        *slot = lin % dim;
        lin /= dim;
    }
}

/// Element of SO(3), acting on tensors of any order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation<T> {
    m: [[T; 3]; 3],
}

impl<T: Real> Rotation<T> {
    /// Validates orthonormality and `det = +1`.
    pub fn new(m: [[T; 3]; 3]) -> Result<Self> {
        let r = Self { m };
        let tol = T::structural_tol();
        if !m.iter().flatten().all(|x| x.is_finite()) {
            return Err(invalid!("rotation has non-finite entries"));
        }
        if r.orthogonality_residual() > tol {
            return Err(invalid!(
                "matrix is not orthonormal (residual {})",
                r.orthogonality_residual()
            ));
        }
        if (r.det() - T::one()).abs() > tol {
            return Err(invalid!("matrix has det {} (expected +1)", r.det()));
        }
        Ok(r)
    }

    /// Wraps a matrix the caller has constructed to be a rotation.
    pub(crate) fn from_matrix_unchecked(m: [[T; 3]; 3]) -> Self {
        Self { m }
    }

    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            m: [[o, z, z], [z, o, z], [z, z, o]],
        }
    }

    pub fn matrix(&self) -> &[[T; 3]; 3] {
        &self.m
    }

    /// Inverse rotation (the transpose).
    pub fn transpose(&self) -> Self {
        Self {
            m: transpose3(&self.m),
        }
    }

    pub fn det(&self) -> T {
        det3(&self.m)
    }

    /// `‖m·mᵀ − I‖_F`.
    pub fn orthogonality_residual(&self) -> T {
        let p = matmul3(&self.m, &transpose3(&self.m));
        let mut acc = T::zero();
        for (i, row) in p.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                let e = if i == j { x - T::one() } else { x };
                acc += e * e;
            }
        }
        acc.sqrt()
    }

    pub fn apply(&self, v: [T; 3]) -> [T; 3] {
        matvec3(&self.m, v)
    }

    /// Frobenius distance between the matrices.
    pub fn distance(&self, other: &Self) -> T {
        let mut acc = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                let d = self.m[i][j] - other.m[i][j];
                acc += d * d;
            }
        }
        acc.sqrt()
    }

    pub fn cast<U: Real>(&self) -> Rotation<U> {
        let mut m = [[U::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = U::from_f64(self.m[i][j].to_f64().unwrap_or(f64::NAN)).unwrap_or(U::nan());
            }
        }
        Rotation { m }
    }
}

/// Composition: `(a * b)` acts as `b` first, then `a`.
impl<T: Real> Mul for Rotation<T> {
    type Output = Rotation<T>;

    fn mul(self, rhs: Self) -> Self::Output {
        Rotation {
            m: matmul3(&self.m, &rhs.m),
        }
    }
}

pub(crate) fn matmul3<T: Real>(a: &[[T; 3]; 3], b: &[[T; 3]; 3]) -> [[T; 3]; 3] {
    let mut c = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    c
}

pub(crate) fn transpose3<T: Real>(a: &[[T; 3]; 3]) -> [[T; 3]; 3] {
    let mut t = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

pub(crate) fn det3<T: Real>(m: &[[T; 3]; 3]) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub(crate) fn matvec3<T: Real>(m: &[[T; 3]; 3], v: [T; 3]) -> [T; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// Layout of a [`TensorTuple`]: what `unflatten` needs to rebuild one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapeMeta {
    pub scalars: Vec<String>,
    /// `(name, order)` per tensor, all over ℝ³.
    pub tensors: Vec<(String, usize)>,
    pub anchor: String,
}

impl ShapeMeta {
    /// Length of the flattened vector.
    pub fn flat_len(&self) -> usize {
        self.scalars.len()
            + self
                .tensors
                .iter()
                .map(|(_, k)| 3usize.pow(*k as u32))
                .sum::<usize>()
    }

    /// Column names such as `p`, `S_00`, `V_0121`.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = self.scalars.clone();
        for (name, order) in &self.tensors {
            names.extend(tensor_column_names(name, *order));
        }
        names
    }
}

/// `name_<indices>` for each entry of an order-k tensor over ℝ³, row-major.
pub fn tensor_column_names(name: &str, order: usize) -> Vec<String> {
    let len = 3usize.pow(order as u32);
    let mut idx = vec![0usize; order];
    (0..len)
        .map(|lin| {
            decode(lin, 3, &mut idx);
            let digits: String = idx.iter().map(|i| char::from(b'0' + *i as u8)).collect();
            if order == 0 {
                name.to_string()
            } else {
                format!("{name}_{digits}")
            }
        })
        .collect()
}

/// Ordered tuple of rotation-invariant scalars and tensors forming one
/// model input, with the tensor that anchors the canonical frame.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorTuple<T> {
    scalars: Vec<(String, T)>,
    tensors: Vec<(String, DenseTensor<T>)>,
    anchor: String,
}

impl<T: Real> TensorTuple<T> {
    pub fn new(
        scalars: Vec<(String, T)>,
        tensors: Vec<(String, DenseTensor<T>)>,
        anchor: impl Into<String>,
    ) -> Result<Self> {
        let anchor = anchor.into();
        if !tensors.iter().any(|(n, _)| *n == anchor) {
            return Err(invalid!("anchor {anchor:?} is not a tensor of the tuple"));
        }
        if let Some((n, t)) = tensors.iter().find(|(_, t)| t.dim() != 3) {
            return Err(invalid!("tensor {n:?} has dim {}, expected 3", t.dim()));
        }
        Ok(Self {
            scalars,
            tensors,
            anchor,
        })
    }

    pub fn scalars(&self) -> &[(String, T)] {
        &self.scalars
    }

    pub fn tensors(&self) -> &[(String, DenseTensor<T>)] {
        &self.tensors
    }

    pub fn anchor_name(&self) -> &str {
        &self.anchor
    }

    pub fn anchor(&self) -> &DenseTensor<T> {
        self.tensor(&self.anchor).expect("anchor validated at construction")
    }

    pub fn tensor(&self, name: &str) -> Option<&DenseTensor<T>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn scalar(&self, name: &str) -> Option<T> {
        self.scalars.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn meta(&self) -> ShapeMeta {
        ShapeMeta {
            scalars: self.scalars.iter().map(|(n, _)| n.clone()).collect(),
            tensors: self
                .tensors
                .iter()
                .map(|(n, t)| (n.clone(), t.order()))
                .collect(),
            anchor: self.anchor.clone(),
        }
    }

    /// Rotates every tensor by `r`; scalars pass through.
    pub fn rotate(&self, r: &Rotation<T>) -> Result<Self> {
        let tensors = self
            .tensors
            .iter()
            .map(|(n, t)| Ok((n.clone(), t.rotate(r)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            scalars: self.scalars.clone(),
            tensors,
            anchor: self.anchor.clone(),
        })
    }

    /// Scalars first in declaration order, then each tensor row-major.
    pub fn flatten(&self) -> Vec<T> {
        let mut out: Vec<T> = self.scalars.iter().map(|(_, v)| *v).collect();
        for (_, t) in &self.tensors {
            out.extend_from_slice(t.data());
        }
        out
    }

    pub fn unflatten(values: &[T], meta: &ShapeMeta) -> Result<Self> {
        if values.len() != meta.flat_len() {
            return Err(invalid!(
                "flat vector has length {}, layout expects {}",
                values.len(),
                meta.flat_len()
            ));
        }
        let ns = meta.scalars.len();
        let scalars = meta
            .scalars
            .iter()
            .cloned()
            .zip(values[..ns].iter().copied())
            .collect();
        let mut pos = ns;
        let mut tensors = Vec::with_capacity(meta.tensors.len());
        for (name, order) in &meta.tensors {
            let len = 3usize.pow(*order as u32);
            let t = DenseTensor::new(*order, 3, values[pos..pos + len].to_vec())?;
            tensors.push((name.clone(), t));
            pos += len;
        }
        Self::new(scalars, tensors, meta.anchor.clone())
    }

    /// Frobenius distance per tensor, in declaration order.
    pub fn tensor_distances(&self, other: &Self) -> Result<Vec<T>> {
        if self.tensors.len() != other.tensors.len() {
            return Err(invalid!("tuples have different tensor counts"));
        }
        self.tensors
            .iter()
            .zip(&other.tensors)
            .map(|((_, a), (_, b))| a.distance(b))
            .collect()
    }

    pub(crate) fn map_tensors(
        &self,
        mut f: impl FnMut(&DenseTensor<T>) -> Result<DenseTensor<T>>,
    ) -> Result<Self> {
        let tensors = self
            .tensors
            .iter()
            .map(|(n, t)| Ok((n.clone(), f(t)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            scalars: self.scalars.clone(),
            tensors,
            anchor: self.anchor.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t3(f: impl FnMut(&[usize]) -> f64, order: usize) -> DenseTensor<f64> {
        DenseTensor::from_fn(order, 3, f).unwrap()
    }

    fn rot_z(theta: f64) -> Rotation<f64> {
        let (s, c) = theta.sin_cos();
        Rotation::new([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]).unwrap()
    }

    #[test]
    fn length_must_match_order() {
        assert!(DenseTensor::<f64>::new(2, 3, vec![0.0; 8]).is_err());
        assert!(DenseTensor::<f64>::new(0, 3, vec![1.0]).is_ok());
        assert!(DenseTensor::<f64>::new(1, 0, vec![]).is_err());
    }

    #[test]
    fn identity_rotation_is_exact() {
        let t = t3(|i| (i[0] * 9 + i[1] * 3 + i[2]) as f64 * 0.37 - 2.0, 3);
        assert_eq!(t.rotate(&Rotation::identity()).unwrap(), t);
    }

    #[test]
    fn order_zero_rotation_is_noop() {
        let s = DenseTensor::scalar(4.5);
        assert_eq!(s.rotate(&rot_z(0.7)).unwrap(), s);
    }

    #[test]
    fn order_one_rotation_is_matvec() {
        let r = rot_z(0.3);
        let v = [1.0, -2.0, 0.5];
        let rv = DenseTensor::vector(v).rotate(&r).unwrap();
        let expect = r.apply(v);
        for i in 0..3 {
            assert!((rv.data()[i] - expect[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn order_two_rotation_matches_matrix_products() {
        let r = rot_z(1.1);
        let m = [[1.0, 2.0, 3.0], [-1.0, 0.5, 2.0], [0.0, 4.0, -3.0]];
        let rotated = DenseTensor::matrix(m).rotate(&r).unwrap();
        let expect = matmul3(&matmul3(r.matrix(), &m), &transpose3(r.matrix()));
        let got = rotated.as_matrix3().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((got[i][j] - expect[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rotation_rejects_other_dims() {
        let t = DenseTensor::<f64>::zeros(2, 2).unwrap();
        assert!(t.rotate(&Rotation::identity()).is_err());
    }

    #[test]
    fn trace_of_identity() {
        let id = DenseTensor::<f64>::diagonal_unit(2, 3).unwrap();
        assert_eq!(id.contract(1, 2).unwrap().as_scalar(), Some(3.0));
    }

    #[test]
    fn contraction_of_delta_times_vector() {
        let v = [0.5, -1.5, 2.0];
        let t = t3(|i| if i[0] == i[1] { v[i[2]] } else { 0.0 }, 3);
        let c = t.contract(1, 2).unwrap();
        assert_eq!(c.as_vector3().unwrap(), [1.5, -4.5, 6.0]);
        // δ_{ij} v_k contracted over (1,3) gives v_j, not 3v.
        let c13 = t.contract(1, 3).unwrap();
        assert_eq!(c13.as_vector3().unwrap(), v);
    }

    #[test]
    fn contraction_errors() {
        let v = DenseTensor::vector([1.0, 2.0, 3.0]);
        assert!(v.contract(1, 2).is_err());
        let m = DenseTensor::<f64>::zeros(2, 3).unwrap();
        assert!(m.contract(1, 1).is_err());
        assert!(m.contract(0, 1).is_err());
        assert!(m.contract(1, 3).is_err());
    }

    #[test]
    fn contraction_keeps_remaining_axis_order() {
        let t = t3(|i| (i[0] + 10 * i[1] + 100 * i[2] + 1000 * i[3]) as f64, 4);
        let c = t.contract(2, 4).unwrap();
        // remaining axes are (1, 3) in that order
        for a in 0..3 {
            for b in 0..3 {
                let expect: f64 = (0..3)
                    .map(|m| (a + 10 * m + 100 * b + 1000 * m) as f64)
                    .sum();
                assert_eq!(c.get(&[a, b]), expect);
            }
        }
    }

    #[test]
    fn contract_to_order_cases() {
        let t2 = t3(|i| (i[0] * 3 + i[1]) as f64, 2);
        assert_eq!(t2.contract_to_order(2).unwrap(), t2);

        let t4 = t3(|i| (i[0] + 2 * i[1] + 5 * i[2] + 7 * i[3]) as f64 * 0.1, 4);
        let c = t4.contract_to_order(2).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let expect: f64 = (0..3).map(|m| t4.get(&[m, m, a, b])).sum();
                assert!((c.get(&[a, b]) - expect).abs() < 1e-14);
            }
        }

        let t5 = DenseTensor::<f64>::zeros(5, 3).unwrap();
        assert_eq!(t5.contract_to_order(3).unwrap().order(), 3);
        assert!(t5.contract_to_order(2).is_err());
        assert!(t2.contract_to_order(3).is_err());
    }

    #[test]
    fn symmetrize_order_two_is_half_sum() {
        let m = [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]];
        let s = DenseTensor::matrix(m).symmetrize().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(s.get(&[i, j]), (m[i][j] + m[j][i]) / 2.0);
            }
        }
        assert!(s.symmetric());
    }

    #[test]
    fn symmetrize_order_three_six_terms() {
        let t = t3(|i| ((i[0] * 9 + i[1] * 3 + i[2]) as f64).sin(), 3);
        let s = t.symmetrize().unwrap();
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let expect = (t.get(&[a, b, c])
                        + t.get(&[a, c, b])
                        + t.get(&[b, a, c])
                        + t.get(&[b, c, a])
                        + t.get(&[c, a, b])
                        + t.get(&[c, b, a]))
                        / 6.0;
                    assert!((s.get(&[a, b, c]) - expect).abs() < 1e-15);
                }
            }
        }
        assert!(s.is_symmetric(0.0));
        assert!(!t.is_symmetric(1e-12));
    }

    #[test]
    fn symmetrize_fixed_point_and_order_limit() {
        let t = t3(|i| ((i.iter().sum::<usize>()) as f64).cos(), 4);
        let s = t.symmetrize().unwrap();
        assert!(s.distance(&t).unwrap() <= 1e-15 * t.norm(), "{}", s.distance(&t).unwrap());
        assert!(DenseTensor::<f64>::zeros(7, 3).unwrap().symmetrize().is_err());
    }

    #[test]
    fn contract_last_and_move_axis() {
        let t = t3(|i| (i[0] * 9 + i[1] * 3 + i[2]) as f64, 3);
        let v = [1.0, 0.0, 2.0];
        let c = t.contract_last_with(&v).unwrap();
        assert_eq!(c.get(&[1, 2]), t.get(&[1, 2, 0]) + 2.0 * t.get(&[1, 2, 2]));
        let moved = t.move_axis_last(0).unwrap();
        assert_eq!(moved.get(&[1, 2, 0]), t.get(&[0, 1, 2]));
    }

    #[test]
    fn newtonian_and_electrostriction_flat_lengths() {
        let s = DenseTensor::<f64>::zeros(2, 3).unwrap();
        let tup = TensorTuple::new(vec![("p".into(), 1.0)], vec![("S".into(), s.clone())], "S")
            .unwrap();
        assert_eq!(tup.flatten().len(), 10);
        let v = DenseTensor::<f64>::zeros(4, 3).unwrap();
        let tup = TensorTuple::new(vec![], vec![("V".into(), v), ("S".into(), s)], "V").unwrap();
        assert_eq!(tup.flatten().len(), 90);
        assert_eq!(tup.meta().column_names()[81], "S_00");
        assert_eq!(tup.meta().column_names()[5], "V_0012");
    }

    #[test]
    fn unflatten_rejects_length_mismatch() {
        let meta = ShapeMeta {
            scalars: vec!["p".into()],
            tensors: vec![("S".into(), 2)],
            anchor: "S".into(),
        };
        assert!(TensorTuple::<f64>::unflatten(&[0.0; 9], &meta).is_err());
        assert!(TensorTuple::<f64>::unflatten(&[0.0; 10], &meta).is_ok());
    }

    #[test]
    fn tuple_requires_known_anchor() {
        let s = DenseTensor::<f64>::zeros(2, 3).unwrap();
        assert!(TensorTuple::new(vec![], vec![("S".into(), s)], "G").is_err());
    }

    #[test]
    fn rotation_validation() {
        assert!(Rotation::new([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]]).is_err());
        assert!(Rotation::new([[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
        let r = rot_z(0.4);
        assert!((r * r.transpose()).distance(&Rotation::identity()) < 1e-15);
    }

    #[test]
    fn works_in_f32() {
        let r = rot_z(0.9).cast::<f32>();
        let t = DenseTensor::<f32>::from_fn(3, 3, |i| (i[0] + 2 * i[1] + 3 * i[2]) as f32).unwrap();
        let back = t.rotate(&r).unwrap().rotate(&r.transpose()).unwrap();
        assert!(back.distance(&t).unwrap() <= 1e-5 * t.norm());
    }
}
