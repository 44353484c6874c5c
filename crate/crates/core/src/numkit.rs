//! Dense row-major matrices and the handful of kernels the learning modules
//! need. Everything is `f64`; batching happens one level up, so a `Mat2` is
//! always a single sample (rows are timesteps unless noted otherwise).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::math;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from row-major data; fails if the length does not match
    /// or any entry is non-finite.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(invalid!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            ));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(alloc::format!(
                "non-finite matrix entry {v}"
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(invalid!("ragged rows"));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, and a 0-column matrix still has rows.
        (0..self.rows).map(move |r| self.row(r))
    }

    /// Applies `f` to every entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise product; shapes must agree.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(invalid!(
                "hadamard shape mismatch {:?} vs {:?}",
                self.shape(),
                other.shape()
            ));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Self, scale: f64) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl core::ops::Index<(usize, usize)> for Mat2 {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Mat2 {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Numerically stable softmax (the maximum is subtracted before
/// exponentiation).
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(invalid!("softmax of an empty vector"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("softmax input is not finite".into()));
    }
    let mut out = v.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

/// In-place softmax for callers that already validated the input.
pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = math::exp(*x - max);
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Log-softmax of one row, computed without forming the probabilities.
pub(crate) fn log_softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + math::ln(v.iter().map(|x| math::exp(x - max)).sum::<f64>());
    v.iter().map(|x| x - lse).collect()
}

/// Row-wise softmax of a matrix.
pub fn softmax_rows(m: &Mat2) -> Result<Mat2> {
    if m.cols() == 0 {
        return Err(invalid!("softmax over zero columns"));
    }
    if !m.is_finite() {
        return Err(Error::Numeric("softmax input is not finite".into()));
    }
    let mut out = m.clone();
    for r in 0..out.rows() {
        softmax_in_place(out.row_mut(r));
    }
    Ok(out)
}

/// Backward pass of a softmax row: given `s = softmax(a)` and `dL/ds`,
/// returns `dL/da = s ⊙ (ds − ⟨ds, s⟩)`.
pub fn softmax_backward(s: &[f64], ds: &[f64]) -> Vec<f64> {
    let dot: f64 = s.iter().zip(ds).map(|(a, b)| a * b).sum();
    s.iter().zip(ds).map(|(si, di)| si * (di - dot)).collect()
}

/// Matrix product `a · b`.
pub fn matmul(a: &Mat2, b: &Mat2) -> Result<Mat2> {
    if a.cols != b.rows {
        return Err(invalid!(
            "matmul dimension mismatch: {}x{} times {}x{}",
            a.rows,
            a.cols,
            b.rows,
            b.cols
        ));
    }
    let mut out = Mat2::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in a.row(i).iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            for (o, &bkj) in out_row.iter_mut().zip(b.row(k)) {
                *o += aik * bkj;
            }
        }
    }
    Ok(out)
}

/// `aᵀ · b` without materializing the transpose.
pub fn matmul_tn(a: &Mat2, b: &Mat2) -> Result<Mat2> {
    if a.rows != b.rows {
        return Err(invalid!(
            "matmul_tn dimension mismatch: ({}x{})ᵀ times {}x{}",
            a.rows,
            a.cols,
            b.rows,
            b.cols
        ));
    }
    let mut out = Mat2::zeros(a.cols, b.cols);
    for k in 0..a.rows {
        let b_row = b.row(k);
        for (i, &aki) in a.row(k).iter().enumerate() {
            if aki == 0.0 {
                continue;
            }
            let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                *o += aki * bkj;
            }
        }
    }
    Ok(out)
}

/// `a · bᵀ` without materializing the transpose.
pub fn matmul_nt(a: &Mat2, b: &Mat2) -> Result<Mat2> {
    if a.cols != b.cols {
        return Err(invalid!(
            "matmul_nt dimension mismatch: {}x{} times ({}x{})ᵀ",
            a.rows,
            a.cols,
            b.rows,
            b.cols
        ));
    }
    let mut out = Mat2::zeros(a.rows, b.rows);
    for i in 0..a.rows {
        let a_row = a.row(i);
        for j in 0..b.rows {
            out.data[i * b.rows + j] = a_row.iter().zip(b.row(j)).map(|(x, y)| x * y).sum();
        }
    }
    Ok(out)
}

/// Swaps the time and feature axes (matrix transpose).
pub fn permute_tf(m: &Mat2) -> Mat2 {
    let mut out = Mat2::zeros(m.cols, m.rows);
    for r in 0..m.rows {
        for c in 0..m.cols {
            out.data[c * m.rows + r] = m.data[r * m.cols + c];
        }
    }
    out
}

/// Compares an analytic gradient with central differences.
///
/// Returns the maximum over coordinates of
/// `|numeric − analytic| / max(1, |analytic|)`.
pub fn grad_check<F>(mut f: F, x: &[f64], analytic_grad: &[f64], h: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if x.len() != analytic_grad.len() {
        return Err(invalid!(
            "gradient has {} entries for {} parameters",
            analytic_grad.len(),
            x.len()
        ));
    }
    if h.is_nan() || h <= 0.0 {
        return Err(invalid!("finite-difference step must be positive, got {h}"));
    }
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Numeric(alloc::format!(
                "objective is not finite around coordinate {i}"
            )));
        }
        let numeric = (up - down) / (2.0 * h);
        let err = (numeric - analytic_grad[i]).abs() / analytic_grad[i].abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_matmul(a: &Mat2, b: &Mat2) -> Mat2 {
        let mut out = Mat2::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = 0.0;
                for k in 0..a.cols() {
                    acc += a[(i, k)] * b[(k, j)];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat2 {
        Mat2::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap()
    }

    #[test]
    fn softmax_examples() {
        let s = softmax(&[0.0, 0.0, 0.0]).unwrap();
        for v in &s {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let s = softmax(&[core::f64::consts::LN_2, 0.0]).unwrap();
        assert!((s[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((s[1] - 1.0 / 3.0).abs() < 1e-15);
        let s = softmax(&[1000.0, 0.0]).unwrap();
        assert!(s.iter().all(|v| v.is_finite()));
        assert!((s[0] - 1.0).abs() < 1e-15 && s[1] < 1e-300);
        assert!(matches!(softmax(&[]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn matmul_examples() {
        let m = Mat2::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(matmul(&Mat2::identity(2), &m).unwrap(), m);
        let col = Mat2::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let p = matmul(&m, &col).unwrap();
        assert_eq!(p.as_slice(), &[2.0, 4.0]);
        assert!(matmul(&col, &col).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_mat(&mut rng, 3, 4);
        let b = random_mat(&mut rng, 4, 2);
        let got = matmul(&a, &b).unwrap();
        let want = naive_matmul(&a, &b);
        for (g, w) in got.as_slice().iter().zip(want.as_slice()) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn transposed_products_agree_with_explicit_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_mat(&mut rng, 5, 3);
        let b = random_mat(&mut rng, 5, 4);
        let c = random_mat(&mut rng, 6, 3);
        let tn = matmul_tn(&a, &b).unwrap();
        let tn_ref = naive_matmul(&permute_tf(&a), &b);
        let nt = matmul_nt(&a, &c).unwrap();
        let nt_ref = naive_matmul(&a, &permute_tf(&c));
        for (g, w) in tn.as_slice().iter().zip(tn_ref.as_slice()) {
            assert!((g - w).abs() < 1e-12);
        }
        for (g, w) in nt.as_slice().iter().zip(nt_ref.as_slice()) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn permute_examples() {
        let one = Mat2::from_vec(1, 1, vec![4.0]).unwrap();
        assert_eq!(permute_tf(&one), one);
        let m = Mat2::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let t = permute_tf(&m);
        assert_eq!(t.shape(), (3, 2));
        assert_eq!(t.as_slice(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = random_mat(&mut rng, 5, 7);
        assert_eq!(permute_tf(&permute_tf(&r)), r);
    }

    #[test]
    fn grad_check_examples() {
        let f = |x: &[f64]| x[0] * x[0];
        let err = grad_check(f, &[3.0], &[6.0], 1e-5).unwrap();
        assert!(err < 1e-8, "{err}");
        let err = grad_check(f, &[3.0], &[5.0], 1e-5).unwrap();
        assert!((err - 1.0 / 5.0).abs() < 1e-6, "{err}");
        assert!(grad_check(f, &[3.0], &[6.0], 0.0).is_err());
        let bad = |_: &[f64]| f64::NAN;
        assert!(matches!(
            grad_check(bad, &[1.0], &[0.0], 1e-5),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn softmax_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let a: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let w: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let loss =
                |x: &[f64]| -> f64 { softmax(x).unwrap().iter().zip(&w).map(|(s, w)| s * w).sum() };
            let s = softmax(&a).unwrap();
            let grad = softmax_backward(&s, &w);
            assert!(grad_check(loss, &a, &grad, 1e-5).unwrap() < 1e-4);
        }
    }

    proptest! {
        #[test]
        fn softmax_is_a_probability_vector(v in prop::collection::vec(-50.0f64..50.0, 1..20)) {
            let s = softmax(&v).unwrap();
            let sum: f64 = s.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(s.iter().all(|&x| x >= 0.0));
            let arg = |x: &[f64]| x.iter().enumerate().fold(0, |b, (i, &v)| if v > x[b] { i } else { b });
            prop_assert_eq!(arg(&v), arg(&s));
        }

        #[test]
        fn softmax_is_shift_invariant(v in prop::collection::vec(-20.0f64..20.0, 1..12), c in -100.0f64..100.0) {
            let a = softmax(&v).unwrap();
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let b = softmax(&shifted).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn matmul_matches_triple_loop(r in 1usize..=16, k in 1usize..=16, c in 1usize..=16, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_mat(&mut rng, r, k);
            let b = random_mat(&mut rng, k, c);
            let got = matmul(&a, &b).unwrap();
            let want = naive_matmul(&a, &b);
            for (g, w) in got.as_slice().iter().zip(want.as_slice()) {
                prop_assert!((g - w).abs() < 1e-12);
            }
        }
    }
}
