//! Dense N-way tensors and the multilinear operations the regression is built on.
//!
//! Storage is row-major: the last mode varies fastest. `unfold(t, m)` puts mode
//! `m` on the rows and enumerates the remaining modes in cyclic order
//! `m+1, …, D-1, 0, …, m-1` on the columns, again with the last listed mode
//! fastest. For mode 0 this is a plain reshape of the storage.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTensor", into = "RawTensor")]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl TryFrom<RawTensor> for DenseTensor {
    type Error = Error;
    fn try_from(raw: RawTensor) -> Result<Self> {
        DenseTensor::new(raw.shape, raw.data)
    }
}

impl From<DenseTensor> for RawTensor {
    fn from(t: DenseTensor) -> Self {
        RawTensor {
            shape: t.shape,
            data: t.data,
        }
    }
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::InvalidShape("tensor needs at least one mode".into()));
    }
    if let Some(m) = shape.iter().position(|&e| e == 0) {
        return Err(Error::InvalidShape(format!("extent of mode {m} is zero")));
    }
    Ok(shape.iter().product())
}

fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for m in (0..shape.len().saturating_sub(1)).rev() {
        strides[m] = strides[m + 1] * shape[m + 1];
    }
    strides
}

/// Advances a row-major multi-index; returns false after the last element.
fn advance(index: &mut [usize], shape: &[usize]) -> bool {
    for m in (0..shape.len()).rev() {
        index[m] += 1;
        if index[m] < shape[m] {
            return true;
        }
        index[m] = 0;
    }
    false
}

pub(crate) fn matrix_from_row_major(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, data)
}

pub(crate) fn matrix_to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(r, c)]);
        }
    }
    out
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n = check_shape(&shape)?;
        if n != data.len() {
            return Err(Error::InvalidShape(format!(
                "shape {shape:?} holds {n} entries but {} were given",
                data.len()
            )));
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let n = check_shape(&shape)?;
        Ok(DenseTensor {
            shape,
            data: vec![0.0; n],
        })
    }

    /// Builds a tensor by evaluating `f` at every multi-index in storage order.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let n = check_shape(&shape)?;
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0; shape.len()];
        loop {
            data.push(f(&idx));
            if !advance(&mut idx, &shape) {
                break;
            }
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut off = 0;
        for (m, &i) in index.iter().enumerate() {
            debug_assert!(i < self.shape[m]);
            off = off * self.shape[m] + i;
        }
        off
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let off = self.offset(index);
        self.data[off] = value;
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseTensor {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, other: &DenseTensor, b: f64) -> Result<DenseTensor> {
        if self.shape != other.shape {
            return Err(Error::DimensionMismatch(format!(
                "shapes {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        Ok(DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect(),
        })
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<DenseTensor> {
        DenseTensor::new(shape, self.data)
    }

    /// Reorders modes: mode `r` of the result is mode `order[r]` of `self`.
    pub fn permute(&self, order: &[usize]) -> Result<DenseTensor> {
        let d = self.order();
        let mut seen = vec![false; d];
        if order.len() != d {
            return Err(Error::InvalidArgument(format!(
                "permutation {order:?} has wrong length for order {d}"
            )));
        }
        for &m in order {
            if m >= d || seen[m] {
                return Err(Error::InvalidArgument(format!(
                    "{order:?} is not a permutation of 0..{d}"
                )));
            }
            seen[m] = true;
        }
        let src_strides = row_major_strides(&self.shape);
        let new_shape: Vec<usize> = order.iter().map(|&m| self.shape[m]).collect();
        let strides: Vec<usize> = order.iter().map(|&m| src_strides[m]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut idx = vec![0; d];
        loop {
            let off: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
            data.push(self.data[off]);
            if !advance(&mut idx, &new_shape) {
                break;
            }
        }
        Ok(DenseTensor { shape: new_shape, data })
    }

    /// Views the tensor as a matrix whose rows enumerate modes `..split` and
    /// columns modes `split..`, both row-major.
    pub fn as_matrix(&self, split: usize) -> DMatrix<f64> {
        let rows: usize = self.shape[..split].iter().product();
        let cols: usize = self.shape[split..].iter().product();
        matrix_from_row_major(rows, cols, &self.data)
    }

    pub fn from_matrix(m: &DMatrix<f64>, shape: Vec<usize>) -> Result<DenseTensor> {
        DenseTensor::new(shape, matrix_to_row_major(m))
    }

    /// Mean over mode 0, kept as an extent-1 leading mode.
    pub fn mean_over_first(&self) -> DenseTensor {
        let n = self.shape[0];
        let inner = self.data.len() / n;
        let mut mean = vec![0.0; inner];
        for row in self.data.chunks(inner) {
            for (acc, v) in mean.iter_mut().zip(row) {
                *acc += v;
            }
        }
        for v in &mut mean {
            *v /= n as f64;
        }
        let mut shape = self.shape.clone();
        shape[0] = 1;
        DenseTensor { shape, data: mean }
    }

    /// Subtracts an extent-1-leading tensor from every slice along mode 0.
    pub fn sub_broadcast_first(&self, row: &DenseTensor) -> Result<DenseTensor> {
        if row.shape[0] != 1 || row.shape[1..] != self.shape[1..] {
            return Err(Error::DimensionMismatch(format!(
                "cannot broadcast {:?} over {:?}",
                row.shape, self.shape
            )));
        }
        let inner = row.data.len();
        let mut data = self.data.clone();
        for chunk in data.chunks_mut(inner) {
            for (v, r) in chunk.iter_mut().zip(&row.data) {
                *v -= r;
            }
        }
        Ok(DenseTensor {
            shape: self.shape.clone(),
            data,
        })
    }

    /// Slices along mode 0, keeping samples `range`.
    pub fn slice_first(&self, range: std::ops::Range<usize>) -> Result<DenseTensor> {
        if range.start >= range.end || range.end > self.shape[0] {
            return Err(Error::InvalidArgument(format!(
                "slice {range:?} of mode-0 extent {}",
                self.shape[0]
            )));
        }
        let inner = self.data.len() / self.shape[0];
        let mut shape = self.shape.clone();
        shape[0] = range.len();
        Ok(DenseTensor {
            shape,
            data: self.data[range.start * inner..range.end * inner].to_vec(),
        })
    }
}

fn cyclic_order(mode: usize, order: usize) -> Vec<usize> {
    (0..order).map(|r| (mode + r) % order).collect()
}

fn inverse_permutation(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (r, &m) in p.iter().enumerate() {
        inv[m] = r;
    }
    inv
}

/// Mode-`mode` matricization, `I_mode × Π_{others} I`.
pub fn unfold(t: &DenseTensor, mode: usize) -> Result<DMatrix<f64>> {
    if mode >= t.order() {
        return Err(Error::ModeOutOfRange { mode, order: t.order() });
    }
    if mode == 0 {
        return Ok(t.as_matrix(1));
    }
    Ok(t.permute(&cyclic_order(mode, t.order()))?.as_matrix(1))
}

/// Inverse of [`unfold`] for a tensor of the given shape.
pub fn fold(m: &DMatrix<f64>, mode: usize, shape: &[usize]) -> Result<DenseTensor> {
    let total = check_shape(shape)?;
    if mode >= shape.len() {
        return Err(Error::ModeOutOfRange {
            mode,
            order: shape.len(),
        });
    }
    if m.nrows() != shape[mode] || m.nrows() * m.ncols() != total {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix cannot fold into {shape:?} along mode {mode}",
            m.nrows(),
            m.ncols()
        )));
    }
    let perm = cyclic_order(mode, shape.len());
    let permuted_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let permuted = DenseTensor::from_matrix(m, permuted_shape)?;
    if mode == 0 {
        return Ok(permuted);
    }
    permuted.permute(&inverse_permutation(&perm))
}

/// `t ×_mode m`: replaces extent `I_mode` by `m.nrows()`.
pub fn mode_multiply(t: &DenseTensor, m: &DMatrix<f64>, mode: usize) -> Result<DenseTensor> {
    let unfolded = unfold(t, mode)?;
    if m.ncols() != t.shape()[mode] {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} columns but mode {mode} has extent {}",
            m.ncols(),
            t.shape()[mode]
        )));
    }
    let mut shape = t.shape().to_vec();
    shape[mode] = m.nrows();
    fold(&(m * unfolded), mode, &shape)
}

/// Which modes of the regressor are summed against which modes of the coefficient.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModePairing {
    regressor_modes: Vec<usize>,
    coefficient_modes: Vec<usize>,
}

fn has_repeat(modes: &[usize]) -> bool {
    modes.iter().enumerate().any(|(i, m)| modes[..i].contains(m))
}

impl ModePairing {
    pub fn new(regressor_modes: Vec<usize>, coefficient_modes: Vec<usize>) -> Result<Self> {
        if regressor_modes.is_empty() {
            return Err(Error::EmptyPairing);
        }
        if regressor_modes.len() != coefficient_modes.len() {
            return Err(Error::InvalidArgument(format!(
                "pairing lists differ in length: {regressor_modes:?} vs {coefficient_modes:?}"
            )));
        }
        if has_repeat(&regressor_modes) || has_repeat(&coefficient_modes) {
            return Err(Error::InvalidArgument("repeated mode in pairing".into()));
        }
        Ok(ModePairing {
            regressor_modes,
            coefficient_modes,
        })
    }

    /// Pairs regressor modes `1..=n` with coefficient modes `0..n`: every
    /// non-sample mode of the regressor against the leading modes of the
    /// coefficient.
    pub fn autoregressive(n_feature_modes: usize) -> Result<Self> {
        ModePairing::new((1..=n_feature_modes).collect(), (0..n_feature_modes).collect())
    }

    pub fn regressor_modes(&self) -> &[usize] {
        &self.regressor_modes
    }

    pub fn coefficient_modes(&self) -> &[usize] {
        &self.coefficient_modes
    }
}

/// Contracted product `⟨X, B⟩`. Result modes are the unpaired modes of `x`
/// followed by the unpaired modes of `b`, each in their original order. A
/// full contraction yields a shape-`[1]` tensor.
pub fn contract(x: &DenseTensor, b: &DenseTensor, pairing: &ModePairing) -> Result<DenseTensor> {
    let xm = pairing.regressor_modes();
    let bm = pairing.coefficient_modes();
    if xm.is_empty() {
        return Err(Error::EmptyPairing);
    }
    for (&p, &q) in xm.iter().zip(bm) {
        if p >= x.order() {
            return Err(Error::ModeOutOfRange {
                mode: p,
                order: x.order(),
            });
        }
        if q >= b.order() {
            return Err(Error::ModeOutOfRange {
                mode: q,
                order: b.order(),
            });
        }
        if x.shape()[p] != b.shape()[q] {
            return Err(Error::DimensionMismatch(format!(
                "regressor mode {p} (extent {}) paired with coefficient mode {q} (extent {})",
                x.shape()[p],
                b.shape()[q]
            )));
        }
    }
    let x_free: Vec<usize> = (0..x.order()).filter(|m| !xm.contains(m)).collect();
    let b_free: Vec<usize> = (0..b.order()).filter(|m| !bm.contains(m)).collect();

    let x_perm: Vec<usize> = x_free.iter().chain(xm).copied().collect();
    let b_perm: Vec<usize> = bm.iter().chain(&b_free).copied().collect();
    let xp = x.permute(&x_perm)?;
    let bp = b.permute(&b_perm)?;
    let product = xp.as_matrix(x_free.len()) * bp.as_matrix(bm.len());

    let mut shape: Vec<usize> = x_free
        .iter()
        .map(|&m| x.shape()[m])
        .chain(b_free.iter().map(|&m| b.shape()[m]))
        .collect();
    if shape.is_empty() {
        shape.push(1);
    }
    DenseTensor::from_matrix(&product, shape)
}

/// Core tensor plus one factor matrix per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TuckerFactors {
    core: DenseTensor,
    factors: Vec<DMatrix<f64>>,
}

impl TuckerFactors {
    pub fn new(core: DenseTensor, factors: Vec<DMatrix<f64>>) -> Result<Self> {
        if factors.len() != core.order() {
            return Err(Error::DimensionMismatch(format!(
                "{} factors for a core of order {}",
                factors.len(),
                core.order()
            )));
        }
        for (d, f) in factors.iter().enumerate() {
            if f.ncols() != core.shape()[d] {
                return Err(Error::DimensionMismatch(format!(
                    "factor {d} has {} columns, core extent is {}",
                    f.ncols(),
                    core.shape()[d]
                )));
            }
            if f.nrows() == 0 {
                return Err(Error::InvalidShape(format!("factor {d} has no rows")));
            }
        }
        Ok(TuckerFactors { core, factors })
    }

    pub fn core(&self) -> &DenseTensor {
        &self.core
    }

    pub fn factors(&self) -> &[DMatrix<f64>] {
        &self.factors
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.core.shape().to_vec()
    }

    pub fn target_shape(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.nrows()).collect()
    }

    pub fn reconstruct(&self) -> DenseTensor {
        tucker_reconstruct(self)
    }
}

/// `core ×_0 U_0 ×_1 U_1 … ×_{D-1} U_{D-1}`.
pub fn tucker_reconstruct(f: &TuckerFactors) -> DenseTensor {
    let mut t = f.core.clone();
    for (d, u) in f.factors.iter().enumerate() {
        t = mode_multiply(&t, u, d).expect("TuckerFactors invariants guarantee conformal factors");
    }
    t
}
