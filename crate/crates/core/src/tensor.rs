//! Dense small tensors, smooth fields on boxes, finite-difference jets and
//! the matrix utilities (Lie closure, signature, 3-tensor decomposition)
//! the geometric layers are built on.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default finite-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-3;
/// Default tolerance for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Row-major dense array with an explicit shape.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: data.len(),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut t = Tensor::zeros(&[m.nrows(), m.ncols()]);
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                t[[r, c]] = m[(r, c)];
            }
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut off = 0;
        for (i, (&k, &s)) in idx.iter().zip(&self.shape).enumerate() {
            debug_assert!(k < s, "index {k} out of range {s} in slot {i}");
            off = off * s + k;
        }
        off
    }

    /// Inverse of [`Tensor::offset`].
    pub fn unravel(&self, mut off: usize, idx: &mut [usize]) {
        for slot in (0..self.shape.len()).rev() {
            idx[slot] = off % self.shape[slot];
            off /= self.shape[slot];
        }
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let off = self.offset(idx);
        self.data[off] = value;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|v| v * s)
    }

    pub fn zip_with(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        assert_eq!(self.shape, other.shape, "shape mismatch");
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn add(&self, other: &Tensor) -> Tensor {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        self.zip_with(other, |a, b| a - b)
    }

    /// Max-norm distance to another tensor of the same shape.
    pub fn max_diff(&self, other: &Tensor) -> f64 {
        self.sub(other).max_abs()
    }

    /// Reorders the slots: slot `k` of the result is slot `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Tensor {
        assert_eq!(perm.len(), self.rank());
        let shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let mut out = Tensor::zeros(&shape);
        let mut idx = vec![0; self.rank()];
        let mut src = vec![0; self.rank()];
        for off in 0..out.len() {
            out.unravel(off, &mut idx);
            for (k, &p) in perm.iter().enumerate() {
                src[p] = idx[k];
            }
            out.data[off] = self.get(&src);
        }
        out
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        assert_eq!(self.rank(), 2);
        DMatrix::from_row_slice(self.shape[0], self.shape[1], &self.data)
    }
}

impl<const N: usize> Index<[usize; N]> for Tensor {
    type Output = f64;
    fn index(&self, idx: [usize; N]) -> &f64 {
        &self.data[self.offset(&idx)]
    }
}

impl<const N: usize> IndexMut<[usize; N]> for Tensor {
    fn index_mut(&mut self, idx: [usize; N]) -> &mut f64 {
        let off = self.offset(&idx);
        &mut self.data[off]
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .finish()
    }
}

/// Axis-aligned box; bounds may be infinite.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::Invalid("empty chart box".into()));
        }
        Ok(BoxDomain { lo, hi })
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        BoxDomain {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    pub fn unbounded(dim: usize) -> Self {
        BoxDomain::cube(dim, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// The box with every face moved inwards by `margin`.
    pub fn shrink(&self, margin: f64) -> BoxDomain {
        BoxDomain {
            lo: self.lo.iter().map(|a| a + margin).collect(),
            hi: self.hi.iter().map(|b| b - margin).collect(),
        }
    }

    /// Cartesian product `self × other`.
    pub fn product(&self, other: &BoxDomain) -> BoxDomain {
        let mut lo = self.lo.clone();
        lo.extend_from_slice(&other.lo);
        let mut hi = self.hi.clone();
        hi.extend_from_slice(&other.hi);
        BoxDomain { lo, hi }
    }

    pub fn contains(&self, x: &[f64], margin: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&v, (&a, &b))| v - margin >= a && v + margin <= b)
    }

    pub fn check(&self, x: &[f64], margin: f64) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if self.contains(x, margin) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                point: x.to_vec(),
                margin,
            })
        }
    }

    /// Interpolated point `lo + u·(hi − lo)` for `u ∈ [0,1]ᵈ`, clamped into a finite window.
    pub fn lerp(&self, u: &[f64], window: f64) -> Vec<f64> {
        u.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&s, (&a, &b))| {
                let a = a.max(-window);
                let b = b.min(window);
                a + s * (b - a)
            })
            .collect()
    }
}

pub type Evaluator = Arc<dyn Fn(&[f64]) -> Tensor + Send + Sync>;

#[derive(Clone)]
pub enum DerivativeMode {
    FiniteDifference {
        h: f64,
    },
    /// First-order jet supplied by the caller, shape `[d] ++ output_shape`.
    Analytic(Evaluator),
}

/// A deterministic smooth map from a box in ℝᵈ to tensors of a fixed shape.
#[derive(Clone)]
pub struct SmoothField {
    domain: BoxDomain,
    output_shape: Vec<usize>,
    evaluator: Evaluator,
    mode: DerivativeMode,
}

impl fmt::Debug for SmoothField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothField")
            .field("domain", &self.domain)
            .field("output_shape", &self.output_shape)
            .finish_non_exhaustive()
    }
}

impl SmoothField {
    pub fn new(
        domain: BoxDomain,
        output_shape: &[usize],
        f: impl Fn(&[f64]) -> Tensor + Send + Sync + 'static,
    ) -> Self {
        SmoothField {
            domain,
            output_shape: output_shape.to_vec(),
            evaluator: Arc::new(f),
            mode: DerivativeMode::FiniteDifference { h: DEFAULT_FD_STEP },
        }
    }

    pub fn constant(domain: BoxDomain, value: Tensor) -> Self {
        let shape = value.shape().to_vec();
        SmoothField::new(domain, &shape, move |_| value.clone())
    }

    pub fn with_step(mut self, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Invalid(format!("finite-difference step {h} must be > 0")));
        }
        self.mode = DerivativeMode::FiniteDifference { h };
        Ok(self)
    }

    pub fn with_analytic_jet(mut self, jet: impl Fn(&[f64]) -> Tensor + Send + Sync + 'static) -> Self {
        self.mode = DerivativeMode::Analytic(Arc::new(jet));
        self
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn domain_dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    pub fn mode(&self) -> &DerivativeMode {
        &self.mode
    }

    /// Finite-difference step (the analytic mode still uses it for order 2).
    pub fn step(&self) -> f64 {
        match self.mode {
            DerivativeMode::FiniteDifference { h } => h,
            DerivativeMode::Analytic(_) => DEFAULT_FD_STEP,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Tensor> {
        self.domain.check(x, 0.0)?;
        self.eval_unchecked(x)
    }

    fn eval_unchecked(&self, x: &[f64]) -> Result<Tensor> {
        let t = (self.evaluator)(x);
        if t.shape() != self.output_shape.as_slice() {
            return Err(Error::Invalid(format!(
                "field returned shape {:?}, declared {:?}",
                t.shape(),
                self.output_shape
            )));
        }
        if !t.is_finite() {
            return Err(Error::NonFinite { point: x.to_vec() });
        }
        Ok(t)
    }

    /// Margin [`fd_jet`] needs around `x` for the given order.
    pub fn fd_margin(&self, order: usize) -> f64 {
        2.0 * order as f64 * self.step()
    }
}

/// Partial derivatives of `field` at `x`: shape `[d] ++ out` for order 1 and
/// `[d, d] ++ out` for order 2, derivative slots first.
///
/// Central differences with one Richardson step (`(4·D(h) − D(2h))/3`).
pub fn fd_jet(field: &SmoothField, x: &[f64], order: usize) -> Result<Tensor> {
    let d = field.domain_dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    match order {
        1 => {
            if let DerivativeMode::Analytic(jet) = &field.mode {
                field.domain.check(x, 0.0)?;
                let j = jet(x);
                if !j.is_finite() {
                    return Err(Error::NonFinite { point: x.to_vec() });
                }
                return Ok(j);
            }
            field.domain.check(x, field.fd_margin(1))?;
            first_order(field, x)
        }
        2 => {
            field.domain.check(x, field.fd_margin(2))?;
            if let DerivativeMode::Analytic(jet) = &field.mode {
                let jet = jet.clone();
                let mut inner_shape = vec![d];
                inner_shape.extend_from_slice(&field.output_shape);
                let inner = SmoothField::new(field.domain.clone(), &inner_shape, move |y| jet(y));
                let j2 = first_order(&inner, x)?;
                return Ok(j2);
            }
            second_order(field, x)
        }
        _ => Err(Error::Invalid(format!("unsupported derivative order {order}"))),
    }
}

fn first_order(field: &SmoothField, x: &[f64]) -> Result<Tensor> {
    let d = x.len();
    let h = field.step();
    let mut shape = vec![d];
    shape.extend_from_slice(&field.output_shape);
    let mut out = Tensor::zeros(&shape);
    let block: usize = field.output_shape.iter().product();
    let mut y = x.to_vec();
    for m in 0..d {
        let mut sample = |delta: f64| -> Result<Tensor> {
            y[m] = x[m] + delta;
            let v = field.eval_unchecked(&y);
            y[m] = x[m];
            v
        };
        let p1 = sample(h)?;
        let m1 = sample(-h)?;
        let p2 = sample(2.0 * h)?;
        let m2 = sample(-2.0 * h)?;
        let dst = &mut out.data_mut()[m * block..(m + 1) * block];
        for k in 0..block {
            let d1 = (p1.data[k] - m1.data[k]) / (2.0 * h);
            let d2 = (p2.data[k] - m2.data[k]) / (4.0 * h);
            dst[k] = (4.0 * d1 - d2) / 3.0;
        }
    }
    Ok(out)
}

fn second_order(field: &SmoothField, x: &[f64]) -> Result<Tensor> {
    let d = x.len();
    let h = field.step();
    let mut shape = vec![d, d];
    shape.extend_from_slice(&field.output_shape);
    let mut out = Tensor::zeros(&shape);
    let block: usize = field.output_shape.iter().product();
    let centre = field.eval_unchecked(x)?;
    let mut y = x.to_vec();
    let mut eval_at = |shifts: &[(usize, f64)]| -> Result<Tensor> {
        for &(k, s) in shifts {
            y[k] += s;
        }
        let v = field.eval_unchecked(&y);
        y.copy_from_slice(x);
        v
    };
    for a in 0..d {
        for b in a..d {
            let mut est = [vec![0.0; block], vec![0.0; block]];
            for (slot, step) in [h, 2.0 * h].into_iter().enumerate() {
                if a == b {
                    let p = eval_at(&[(a, step)])?;
                    let m = eval_at(&[(a, -step)])?;
                    for k in 0..block {
                        est[slot][k] = (p.data[k] - 2.0 * centre.data[k] + m.data[k]) / (step * step);
                    }
                } else {
                    let pp = eval_at(&[(a, step), (b, step)])?;
                    let pm = eval_at(&[(a, step), (b, -step)])?;
                    let mp = eval_at(&[(a, -step), (b, step)])?;
                    let mm = eval_at(&[(a, -step), (b, -step)])?;
                    for k in 0..block {
                        est[slot][k] = (pp.data[k] - pm.data[k] - mp.data[k] + mm.data[k]) / (4.0 * step * step);
                    }
                }
            }
            for k in 0..block {
                let v = (4.0 * est[0][k] - est[1][k]) / 3.0;
                out.data[(a * d + b) * block + k] = v;
                out.data[(b * d + a) * block + k] = v;
            }
        }
    }
    Ok(out)
}

pub fn bracket(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

fn flatten(m: &DMatrix<f64>) -> Vec<f64> {
    m.iter().copied().collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Removes the components of `v` along the orthonormal `basis` (two passes).
fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for e in basis {
            let c = dot(v, e);
            for (vi, ei) in v.iter_mut().zip(e) {
                *vi -= c * ei;
            }
        }
    }
}

/// Orthonormal (Frobenius) basis of the smallest bracket-closed subspace
/// containing `generators`.
///
/// Generators are normalised first and their span is extracted from the
/// singular values of the stacked matrix; brackets are then added while their
/// component outside the current span exceeds `tol`.
pub fn lie_closure(generators: &[DMatrix<f64>], tol: f64) -> Result<Vec<DMatrix<f64>>> {
    let Some(first) = generators.first() else {
        return Ok(Vec::new());
    };
    let (r, c) = first.shape();
    if r != c {
        return Err(Error::DimensionMismatch { expected: r, got: c });
    }
    for g in generators {
        if g.shape() != (r, r) {
            return Err(Error::DimensionMismatch {
                expected: r,
                got: g.nrows().max(g.ncols()),
            });
        }
    }
    let rows: Vec<Vec<f64>> = generators
        .iter()
        .filter_map(|g| {
            let n = g.norm();
            (n > tol).then(|| flatten(&(g / n)))
        })
        .collect();
    let mut basis = span_basis(&rows, tol, r * r);

    let mut done = 0;
    while done < basis.len() {
        // Brackets of the new element `done` with every earlier one.
        let mut fresh = Vec::new();
        let e = unflatten(&basis[done], r);
        for j in 0..done {
            let f = unflatten(&basis[j], r);
            let mut v = flatten(&bracket(&e, &f));
            project_out(&mut v, &basis);
            project_out(&mut v, &fresh);
            let n = dot(&v, &v).sqrt();
            if n > tol {
                v.iter_mut().for_each(|x| *x /= n);
                fresh.push(v);
            }
        }
        basis.extend(fresh);
        done += 1;
    }
    Ok(basis.iter().map(|v| unflatten(v, r)).collect())
}

fn unflatten(v: &[f64], r: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(r, r, v)
}

/// Orthonormal basis for the row span, keeping singular values above `tol`.
fn span_basis(rows: &[Vec<f64>], tol: f64, width: usize) -> Vec<Vec<f64>> {
    if rows.is_empty() {
        return Vec::new();
    }
    let stacked = DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j]);
    let svd = stacked.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut out = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            out.push(v_t.row(k).iter().copied().collect());
        }
    }
    out
}

/// Dimension of the span of `mats` (Frobenius, singular values against `tol`).
pub fn span_rank(mats: &[DMatrix<f64>], tol: f64) -> usize {
    let rows: Vec<Vec<f64>> = mats.iter().map(flatten).collect();
    match mats.first() {
        Some(m) => span_basis(&rows, tol, m.len()).len(),
        None => 0,
    }
}

/// Norm of the component of `m` outside `span(basis)`.
pub fn span_residual(basis: &[DMatrix<f64>], m: &DMatrix<f64>, tol: f64) -> f64 {
    let rows: Vec<Vec<f64>> = basis.iter().map(flatten).collect();
    let ortho = span_basis(&rows, tol, m.len());
    let mut v = flatten(m);
    project_out(&mut v, &ortho);
    dot(&v, &v).sqrt()
}

/// Sign counts `(n₊, n₋, n₀)` of the eigenvalues, `|λ| < tol` counted as zero.
pub fn signature(sym: &DMatrix<f64>, tol: f64) -> Result<(usize, usize, usize)> {
    if !sym.is_square() {
        return Err(Error::DimensionMismatch {
            expected: sym.nrows(),
            got: sym.ncols(),
        });
    }
    let asym = (sym - sym.transpose()).amax();
    if asym > tol {
        return Err(Error::Asymmetric { residual: asym, tol });
    }
    let s = (sym + sym.transpose()) * 0.5;
    let eig = s.symmetric_eigenvalues();
    let mut counts = (0, 0, 0);
    for &l in eig.iter() {
        if l.abs() < tol {
            counts.2 += 1;
        } else if l > 0.0 {
            counts.0 += 1;
        } else {
            counts.1 += 1;
        }
    }
    Ok(counts)
}

const PERMS3: [([usize; 3], f64); 6] = [
    ([0, 1, 2], 1.0),
    ([1, 2, 0], 1.0),
    ([2, 0, 1], 1.0),
    ([1, 0, 2], -1.0),
    ([0, 2, 1], -1.0),
    ([2, 1, 0], -1.0),
];

/// Splits a 3-tensor into totally antisymmetric, totally symmetric and
/// cyclic-sum-free parts, returned in that order.
pub fn decompose3(t: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let shape = t.shape();
    if shape.len() != 3 || shape[0] != shape[1] || shape[1] != shape[2] {
        return Err(Error::Invalid(format!("decompose3 needs shape (n,n,n), got {shape:?}")));
    }
    let mut sym = Tensor::zeros(shape);
    let mut alt = Tensor::zeros(shape);
    for (perm, sign) in PERMS3 {
        let p = t.permuted(&perm);
        for k in 0..t.len() {
            sym.data[k] += p.data[k] / 6.0;
            alt.data[k] += sign * p.data[k] / 6.0;
        }
    }
    let bianchi = t.sub(&sym).sub(&alt);
    Ok((alt, sym, bianchi))
}

/// Max-norm of the cyclic sum `T(a,b,c) + T(b,c,a) + T(c,a,b)`.
pub fn cyclic_sum_residual(t: &Tensor) -> f64 {
    t.add(&t.permuted(&[1, 2, 0])).add(&t.permuted(&[2, 0, 1])).max_abs()
}

/// Max residual of total symmetry (all transpositions).
pub fn symmetry_residual(t: &Tensor) -> f64 {
    t.max_diff(&t.permuted(&[1, 0, 2]))
        .max(t.max_diff(&t.permuted(&[0, 2, 1])))
}

/// Max residual of total antisymmetry.
pub fn antisymmetry_residual(t: &Tensor) -> f64 {
    t.add(&t.permuted(&[1, 0, 2]))
        .max_abs()
        .max(t.add(&t.permuted(&[0, 2, 1])).max_abs())
}

/// `log(m)` by the series of `log(I + X)`; requires `‖m − I‖ < 0.5`.
pub fn matrix_log(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let x = m - DMatrix::<f64>::identity(n, n);
    let norm = x.norm();
    if norm >= 0.5 {
        return Err(Error::Invalid(format!(
            "matrix logarithm series needs ‖H − I‖ < 0.5, got {norm}"
        )));
    }
    let mut term = x.clone();
    let mut sum = x.clone();
    for k in 2..200 {
        term = &term * &x;
        let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
        sum += &term * (sign / k as f64);
        if term.norm() / (k as f64) < 1e-18 {
            break;
        }
    }
    Ok(sum)
}
