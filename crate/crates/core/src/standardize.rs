//! Canonical "standard position" of a symmetric tensor (or tuple of tensors)
//! under SO(3), together with the rotation that restores the observed frame.
//!
//! Even order: contract the first two axes down to a 3×3 matrix, take its
//! eigenbasis `R`, and set `xs = Rᵀ(T)`. Odd order: contract down to order 3,
//! form `M = [V1 V2 V3]` from the three single contractions, factor
//! `M = R·U` with positive diagonal, and again set `xs = Rᵀ(T)`. In both
//! cases `T = R(xs)`.
//!
//! Two situations need more than the bare factorization to stay a function
//! of the rotation orbit:
//!
//! * An eigenbasis is only defined up to the sign flips
//!   `diag(±1, ±1, ±1)` with det +1 (a Klein four-group). The flips are
//!   fixed by making the largest-magnitude entry of two independent parity
//!   classes of the standardized tensors positive. Flips that the data
//!   cannot resolve (e.g. an order-2 anchor alone, which is invariant under
//!   all of them) are reported as the frame's [`SignGroup`] stabilizer, and
//!   [`restore_prediction`] averages over it.
//! * For a fully symmetric odd tensor, `V1 = V2 = V3`, so `M` has rank one
//!   and QR leaves two columns undetermined. The frame is then completed
//!   from further equivariant vectors (`T(·, q1, q1)` and its index
//!   permutations) by Gram–Schmidt, the third axis being `q1 × q2`.
//!
//! Inputs whose frame is still not unique (repeated eigenvalues, rank-
//! deficient odd input that cannot be completed) standardize without error
//! and carry `degenerate = true`.

use std::cell::Cell;

use crate::error::{invalid, Result};
use crate::linalg::{qr3, sym_eig3};
use crate::scalar::Real;
use crate::tensor::{decode, DenseTensor, Rotation, TensorTuple};

thread_local! {
    static CALLS: Cell<u64> = const { Cell::new(0) };
}

/// Number of standardizations performed on the current thread.
pub fn standardize_call_count() -> u64 {
    CALLS.with(|c| c.get())
}

fn bump_calls() {
    CALLS.with(|c| c.set(c.get() + 1));
}

/// How the restoring rotation was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameSource {
    /// Eigenbasis of the contracted order-2 form.
    Eigen,
    /// QR of the contracted odd form.
    Qr,
    /// Gram–Schmidt completion after a rank-deficient QR input.
    Completed,
}

/// A subgroup of the sign flips `{I, diag(1,-1,-1), diag(-1,1,-1), diag(-1,-1,1)}`.
///
/// Bit `e` is set when element `e` belongs to the group, where element
/// `e = s1 + 2·s2` flips axis 0 if `s1 = 1`, axis 1 if `s2 = 1`, and axis 2
/// when exactly one of them is set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignGroup(u8);

impl SignGroup {
    pub const TRIVIAL: SignGroup = SignGroup(0b0001);
    pub const FULL: SignGroup = SignGroup(0b1111);

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn is_trivial(&self) -> bool {
        *self == Self::TRIVIAL
    }

    pub fn element_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..4).filter(move |e| self.0 & (1 << e) != 0)
    }

    /// The group's elements as rotations.
    pub fn elements<T: Real>(&self) -> Vec<Rotation<T>> {
        self.element_indices().map(sign_flip).collect()
    }

    /// Whether `r` equals one of the elements within `tol` (Frobenius).
    pub fn contains<T: Real>(&self, r: &Rotation<T>, tol: T) -> bool {
        self.elements::<T>().iter().any(|e| e.distance(r) <= tol)
    }
}

/// Sign-flip rotation for element index `e` (see [`SignGroup`]).
pub fn sign_flip<T: Real>(e: usize) -> Rotation<T> {
    let d0 = if e & 1 != 0 { -T::one() } else { T::one() };
    let d1 = if e & 2 != 0 { -T::one() } else { T::one() };
    let d2 = d0 * d1;
    let z = T::zero();
    Rotation::from_matrix_unchecked([[d0, z, z], [z, d1, z], [z, z, d2]])
}

/// Canonical frame of a sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame<T> {
    /// Rotation `R` with `original = R(xs)`.
    pub restore: Rotation<T>,
    pub degenerate: bool,
    pub source: FrameSource,
    /// Sign flips under which the standard position is (numerically) invariant.
    pub stabilizer: SignGroup,
    /// Relative eigen-gap (even), relative `min |u_ii|` (odd, QR), or the
    /// relative Gram–Schmidt residual (completed frames).
    pub margin: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StandardizedTensor<T> {
    pub xs: DenseTensor<T>,
    pub frame: Frame<T>,
}

/// A tensor tuple in standard position plus its restoring frame.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardizedSample<T> {
    pub xs: TensorTuple<T>,
    pub frame: Frame<T>,
}

impl<T: Real> StandardizedSample<T> {
    pub fn restore(&self) -> &Rotation<T> {
        &self.frame.restore
    }

    pub fn degenerate(&self) -> bool {
        self.frame.degenerate
    }
}

struct RawFrame<T> {
    rotation: Rotation<T>,
    source: FrameSource,
    degenerate: bool,
    margin: T,
}

fn even_frame<T: Real>(t: &DenseTensor<T>) -> Result<RawFrame<T>> {
    let t2 = t.contract_to_order(2)?;
    let m = t2.as_matrix3().ok_or_else(|| invalid!("anchor must live over ℝ³"))?;
    let eig = sym_eig3(&m)?;
    Ok(RawFrame {
        rotation: eig.basis,
        source: FrameSource::Eigen,
        degenerate: eig.degenerate,
        margin: eig.relative_gap,
    })
}

fn odd_frame<T: Real>(t: &DenseTensor<T>) -> Result<RawFrame<T>> {
    let t3 = t.contract_to_order(3)?;
    let v1 = t3.contract(2, 3)?.as_vector3().expect("order-1 over ℝ³");
    let v2 = t3.contract(1, 3)?.as_vector3().expect("order-1 over ℝ³");
    let v3 = t3.contract(1, 2)?.as_vector3().expect("order-1 over ℝ³");
    let mut m = [[T::zero(); 3]; 3];
    for i in 0..3 {
        m[i] = [v1[i], v2[i], v3[i]];
    }
    let qr = qr3(&m)?;
    if !qr.degenerate {
        return Ok(RawFrame {
            rotation: qr.q,
            source: FrameSource::Qr,
            degenerate: false,
            margin: qr.relative_min_diag,
        });
    }
    if let Some((rotation, margin)) = complete_odd_frame(&t3, [v1, v2, v3])? {
        return Ok(RawFrame {
            rotation,
            source: FrameSource::Completed,
            degenerate: false,
            margin,
        });
    }
    Ok(RawFrame {
        rotation: qr.q,
        source: FrameSource::Qr,
        degenerate: true,
        margin: qr.relative_min_diag,
    })
}

fn dot3<T: Real>(a: &[T; 3], b: &[T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3<T: Real>(a: &[T; 3], b: &[T; 3]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Gram–Schmidt over equivariant candidate vectors; `None` if fewer than
/// two independent directions exist.
fn complete_odd_frame<T: Real>(
    t3: &DenseTensor<T>,
    contractions: [[T; 3]; 3],
) -> Result<Option<(Rotation<T>, T)>> {
    let scale = t3.norm();
    if scale == T::zero() {
        return Ok(None);
    }
    let thresh = T::degeneracy_tol() * scale;
    let mut axes: Vec<[T; 3]> = Vec::with_capacity(2);
    let mut margin = T::infinity();
    let mut consider = |v: [T; 3], axes: &mut Vec<[T; 3]>| {
        if axes.len() >= 2 {
            return;
        }
        let mut r = v;
        for a in axes.iter() {
            let c = dot3(a, &r);
            for i in 0..3 {
                r[i] -= c * a[i];
            }
        }
        let n = dot3(&r, &r).sqrt();
        if n > thresh {
            margin = margin.min(n / scale);
            axes.push([r[0] / n, r[1] / n, r[2] / n]);
        }
    };
    for v in contractions {
        consider(v, &mut axes);
    }
    if axes.is_empty() {
        return Ok(None);
    }
    if axes.len() < 2 {
        let q1 = axes[0];
        // T(·, q1, q1) with the free index in each of the three slots.
        for free in [0usize, 1, 2] {
            let (o1, o2) = match free {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let mut v = [T::zero(); 3];
            let mut idx = [0usize; 3];
            for (lin, &x) in t3.data().iter().enumerate() {
                decode(lin, 3, &mut idx);
                v[idx[free]] += x * q1[idx[o1]] * q1[idx[o2]];
            }
            consider(v, &mut axes);
        }
    }
    if axes.len() < 2 {
        return Ok(None);
    }
    let q3 = cross3(&axes[0], &axes[1]);
    let mut m = [[T::zero(); 3]; 3];
    for i in 0..3 {
        m[i] = [axes[0][i], axes[1][i], q3[i]];
    }
    Ok(Some((Rotation::from_matrix_unchecked(m), margin)))
}

/// Picks the sign flip that canonicalizes `tensors` (already in the
/// eigenframe), returning the flip index and the unresolved stabilizer.
fn canonical_signs<T: Real>(tensors: &[&DenseTensor<T>]) -> (usize, SignGroup) {
    // Antisymmetric parts put equal magnitudes of opposite sign in one
    // class, so the representative is the first entry (in tensor, then
    // row-major order) within a relative window of the class maximum.
    let tie = T::one() - T::degeneracy_tol();
    let mut peak = [T::zero(); 4];
    let mut sq = T::zero();
    let class_of = |idx: &[usize]| {
        let mut counts = [0usize; 3];
        for &i in idx {
            counts[i] += 1;
        }
        let a = (counts[0] + counts[2]) & 1;
        let b = (counts[1] + counts[2]) & 1;
        a | (b << 1)
    };
    for t in tensors {
        sq += t.data().iter().fold(T::zero(), |acc, &x| acc + x * x);
        let mut idx = vec![0usize; t.order()];
        for (lin, &x) in t.data().iter().enumerate() {
            decode(lin, 3, &mut idx);
            let c = class_of(&idx);
            peak[c] = peak[c].max(x.abs());
        }
    }
    // Per nontrivial parity class: (peak |x|, representative value).
    let mut best: [Option<(T, T)>; 4] = [None; 4];
    for t in tensors {
        let mut idx = vec![0usize; t.order()];
        for (lin, &x) in t.data().iter().enumerate() {
            decode(lin, 3, &mut idx);
            let c = class_of(&idx);
            if c != 0 && best[c].is_none() && x.abs() >= tie * peak[c] && peak[c] > T::zero() {
                best[c] = Some((peak[c], x));
            }
        }
    }
    let thresh = T::degeneracy_tol() * sq.sqrt();
    let mut classes: Vec<(usize, T, T)> = (1..4)
        .filter_map(|c| best[c].map(|(m, x)| (c, m, x)))
        .filter(|&(_, m, _)| m > thresh)
        .collect();
    // Largest magnitude first; near-ties resolved by class index.
    classes.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite").then(a.0.cmp(&b.0)));
    for i in 1..classes.len() {
        let mut j = i;
        while j > 0 && classes[j].1 >= tie * classes[j - 1].1 && classes[j].0 < classes[j - 1].0 {
            classes.swap(j, j - 1);
            j -= 1;
        }
    }
    classes.truncate(2);

    // An entry of class (a, b) changes sign under element (s1, s2) iff
    // a·s1 + b·s2 is odd.
    let flips = |class: usize, e: usize| ((class & e).count_ones() & 1) == 1;
    let mut chosen = None;
    let mut stabilizer = 0u8;
    for e in 0..4 {
        let fixes = classes
            .iter()
            .all(|&(c, _, x)| flips(c, e) == (x < T::zero()));
        if fixes && chosen.is_none() {
            chosen = Some(e);
        }
        if classes.iter().all(|&(c, _, _)| !flips(c, e)) {
            stabilizer |= 1 << e;
        }
    }
    (chosen.unwrap_or(0), SignGroup(stabilizer))
}

fn finish<T: Real>(
    raw: RawFrame<T>,
    tensors: &[&DenseTensor<T>],
) -> Result<(Vec<DenseTensor<T>>, Frame<T>)> {
    let inverse = raw.rotation.transpose();
    let mut xs = tensors
        .iter()
        .map(|t| t.rotate(&inverse))
        .collect::<Result<Vec<_>>>()?;
    let mut restore = raw.rotation;
    let mut stabilizer = SignGroup::TRIVIAL;
    if raw.source == FrameSource::Eigen {
        let refs: Vec<&DenseTensor<T>> = xs.iter().collect();
        let (flip, stab) = canonical_signs(&refs);
        stabilizer = stab;
        if flip != 0 {
            let d = sign_flip::<T>(flip);
            xs = xs.iter().map(|t| t.rotate(&d)).collect::<Result<Vec<_>>>()?;
            restore = restore * d;
        }
    }
    Ok((
        xs,
        Frame {
            restore,
            degenerate: raw.degenerate,
            source: raw.source,
            stabilizer,
            margin: raw.margin,
        },
    ))
}

fn check_input<T: Real>(t: &DenseTensor<T>) -> Result<()> {
    if t.dim() != 3 {
        return Err(invalid!("standardization needs tensors over ℝ³"));
    }
    if !t.is_finite() {
        return Err(invalid!("tensor has non-finite entries"));
    }
    Ok(())
}

/// Standard position of an even-order (≥ 2) symmetric tensor.
pub fn standardize_even<T: Real>(t: &DenseTensor<T>) -> Result<StandardizedTensor<T>> {
    check_input(t)?;
    if t.order() < 2 || t.order() % 2 != 0 {
        return Err(invalid!("even standardization needs even order >= 2, got {}", t.order()));
    }
    if !t.is_symmetric(T::lit(1e-10).max(T::structural_tol())) {
        return Err(invalid!("even standardization needs a symmetric tensor"));
    }
    bump_calls();
    let (mut xs, frame) = finish(even_frame(t)?, &[t])?;
    Ok(StandardizedTensor {
        xs: xs.pop().expect("one tensor"),
        frame,
    })
}

/// Standard position of an odd-order (≥ 3) tensor.
pub fn standardize_odd<T: Real>(t: &DenseTensor<T>) -> Result<StandardizedTensor<T>> {
    check_input(t)?;
    if t.order() < 3 || t.order() % 2 != 1 {
        return Err(invalid!("odd standardization needs odd order >= 3, got {}", t.order()));
    }
    bump_calls();
    let (mut xs, frame) = finish(odd_frame(t)?, &[t])?;
    Ok(StandardizedTensor {
        xs: xs.pop().expect("one tensor"),
        frame,
    })
}

/// Standard position of a single tensor of order ≥ 2, by parity.
pub fn standardize<T: Real>(t: &DenseTensor<T>) -> Result<StandardizedTensor<T>> {
    if t.order() % 2 == 0 {
        standardize_even(t)
    } else {
        standardize_odd(t)
    }
}

/// Standardizes a whole tuple with one rotation derived from its anchor.
///
/// The anchor is symmetrized (orders up to 6) before the frame is derived,
/// so a non-symmetric anchor such as a velocity gradient is canonicalized
/// through its symmetric part; the anchor itself is rotated like every
/// other tensor. Scalars pass through unchanged.
pub fn standardize_tuple<T: Real>(x: &TensorTuple<T>) -> Result<StandardizedSample<T>> {
    let anchor = x.anchor();
    check_input(anchor)?;
    if anchor.order() < 2 {
        return Err(invalid!("anchor must have order >= 2, got {}", anchor.order()));
    }
    bump_calls();
    let sym;
    let anchor = if anchor.order() <= crate::tensor::MAX_SYMMETRIZE_ORDER {
        sym = anchor.symmetrize()?;
        &sym
    } else {
        anchor
    };
    let raw = if anchor.order() % 2 == 0 {
        even_frame(anchor)?
    } else {
        odd_frame(anchor)?
    };
    let refs: Vec<&DenseTensor<T>> = x.tensors().iter().map(|(_, t)| t).collect();
    let (xs, frame) = finish(raw, &refs)?;
    let mut xs = xs.into_iter();
    let tuple = x.map_tensors(|_| Ok(xs.next().expect("same tensor count")))?;
    Ok(StandardizedSample { xs: tuple, frame })
}

/// Maps a standard-position label back to the observed frame.
pub fn restore_label<T: Real>(ys: &DenseTensor<T>, sample: &StandardizedSample<T>) -> Result<DenseTensor<T>> {
    ys.rotate(&sample.frame.restore)
}

/// Maps a kernel prediction back to the observed frame, first averaging it
/// over the frame's sign stabilizer so that the result does not depend on
/// which representative of the stabilizer the frame happened to pick.
pub fn restore_prediction<T: Real>(ys: &DenseTensor<T>, frame: &Frame<T>) -> Result<DenseTensor<T>> {
    let averaged = if frame.stabilizer.is_trivial() {
        ys.clone()
    } else {
        let elems = frame.stabilizer.elements::<T>();
        let mut acc = DenseTensor::zeros(ys.order(), ys.dim())?;
        for d in &elems {
            acc = acc.lin_comb(T::one(), &ys.rotate(d)?, T::one())?;
        }
        acc.scale(T::one() / T::from_usize(elems.len()).expect("small count"))
    };
    averaged.rotate(&frame.restore)
}
