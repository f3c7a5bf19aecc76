//! Probability-simplex primitives and credal-set geometry.
//!
//! Labels are stored zero-based (`0..K`) everywhere inside the crate; file
//! formats that use `1..K` convert at the boundary.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Sums closer to one than this are kept bit-for-bit.
const EXACT_SUM_TOL: f64 = 1e-12;
/// Sums within this distance of one are renormalized, larger drift is rejected.
pub const RENORMALIZE_TOL: f64 = 1e-6;
/// Tolerance used by the `WeightMatrix` and network output invariants.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim("matrix data", rows * cols, data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::dim("matrix row", cols, r.len()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
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

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // `chunks_exact(0)` panics, zero-width matrices still have rows.
        (0..self.rows).map(move |i| self.row(i))
    }

    /// New matrix made of the given rows, in order (repetitions allowed).
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: idx.len(), cols: self.cols, data }
    }
}

/// A point on the probability simplex with `K >= 2` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates `values`, renormalizing a sum drift of at most `1e-6`.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        normalize_in_place(&mut values)?;
        Ok(Self(values))
    }

    pub fn one_hot(k: usize, class: usize) -> Result<Self> {
        if k < 2 || class >= k {
            return Err(Error::Domain(format!("one-hot class {class} with K={k}")));
        }
        let mut v = vec![0.0; k];
        v[class] = 1.0;
        Ok(Self(v))
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::Simplex(format!("K={k} < 2")));
        }
        Ok(Self(vec![1.0 / k as f64; k]))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        ProbVector::new(v)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(p: ProbVector) -> Self {
        p.0
    }
}

impl AsRef<[f64]> for ProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Checks simplex membership of `values` and renormalizes small drift.
///
/// Entries in `[-1e-9, 0)` are treated as rounding noise and set to zero.
pub fn normalize_in_place(values: &mut [f64]) -> Result<()> {
    if values.len() < 2 {
        return Err(Error::Simplex(format!("K={} < 2", values.len())));
    }
    let mut sum = 0.0;
    for v in values.iter_mut() {
        if !v.is_finite() || *v < -SIMPLEX_TOL || *v > 1.0 + RENORMALIZE_TOL {
            return Err(Error::Simplex(format!("entry {v} outside [0, 1]")));
        }
        if *v < 0.0 {
            *v = 0.0;
        }
        sum += *v;
    }
    let drift = (sum - 1.0).abs();
    if drift > RENORMALIZE_TOL {
        return Err(Error::Simplex(format!("entries sum to {sum}")));
    }
    if drift > EXACT_SUM_TOL {
        for v in values.iter_mut() {
            *v /= sum;
        }
    }
    Ok(())
}

/// `N` instances with features, `M` member predictions over `K` classes and
/// optional labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredalDataset {
    features: Matrix,
    n: usize,
    m: usize,
    k: usize,
    /// Flattened `N x M x K`.
    predictions: Vec<f64>,
    labels: Option<Vec<usize>>,
}

impl CredalDataset {
    /// Builds a dataset from a flattened `N x M x K` prediction tensor.
    ///
    /// Every `K` block is validated (and renormalized) as a [`ProbVector`].
    pub fn new(
        features: Matrix,
        m: usize,
        k: usize,
        mut predictions: Vec<f64>,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        let n = features.rows();
        if n == 0 {
            return Err(Error::Domain("dataset needs N >= 1".into()));
        }
        if m == 0 {
            return Err(Error::Domain("dataset needs M >= 1".into()));
        }
        if k < 2 {
            return Err(Error::Domain(format!("dataset needs K >= 2, got {k}")));
        }
        if predictions.len() != n * m * k {
            return Err(Error::dim("prediction tensor", n * m * k, predictions.len()));
        }
        for (b, block) in predictions.chunks_exact_mut(k).enumerate() {
            normalize_in_place(block)
                .map_err(|e| Error::Simplex(format!("instance {} member {}: {e}", b / m, b % m)))?;
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::dim("labels", n, l.len()));
            }
            if let Some((i, &y)) = l.iter().enumerate().find(|(_, &y)| y >= k) {
                return Err(Error::Domain(format!("label {y} of instance {i} not below K={k}")));
            }
        }
        Ok(Self { features, n, m, k, predictions, labels })
    }

    /// Same as [`CredalDataset::new`] with per-instance member vectors.
    pub fn from_members(features: Matrix, members: &[Vec<ProbVector>], labels: Option<Vec<usize>>) -> Result<Self> {
        let m = members.first().map_or(0, Vec::len);
        let k = members.first().and_then(|r| r.first()).map_or(0, ProbVector::len);
        let mut flat = Vec::with_capacity(members.len() * m * k);
        for row in members {
            if row.len() != m {
                return Err(Error::dim("members per instance", m, row.len()));
            }
            for p in row {
                if p.len() != k {
                    return Err(Error::dim("classes", k, p.len()));
                }
                flat.extend_from_slice(p.as_slice());
            }
        }
        if features.rows() != members.len() {
            return Err(Error::dim("feature rows", members.len(), features.rows()));
        }
        Self::new(features, m, k, flat, labels)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn require_labels(&self) -> Result<&[usize]> {
        self.labels.as_deref().ok_or_else(|| Error::Domain("dataset has no labels".into()))
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::dim("labels", self.n, labels.len()));
        }
        if labels.iter().any(|&y| y >= self.k) {
            return Err(Error::Domain("label out of range".into()));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Prediction of member `m` on instance `i`.
    #[inline]
    pub fn prediction(&self, i: usize, m: usize) -> &[f64] {
        let start = (i * self.m + m) * self.k;
        &self.predictions[start..start + self.k]
    }

    /// All `M x K` predictions of instance `i`, member-major.
    #[inline]
    pub fn instance(&self, i: usize) -> &[f64] {
        let w = self.m * self.k;
        &self.predictions[i * w..(i + 1) * w]
    }

    pub fn raw_predictions(&self) -> &[f64] {
        &self.predictions
    }

    /// `N x K` predictions of a single member.
    pub fn member(&self, m: usize) -> Matrix {
        let mut out = Matrix::zeros(self.n, self.k);
        for i in 0..self.n {
            out.row_mut(i).copy_from_slice(self.prediction(i, m));
        }
        out
    }

    /// Predictions of the uniform average `f_avg = (1/M) sum_m f^(m)`.
    pub fn mean_predictions(&self) -> Matrix {
        let w = WeightMatrix::uniform(self.n, self.m);
        combine_dataset(self, &w).expect("uniform weights match the dataset")
    }

    /// Dataset restricted to the given instances (in order).
    pub fn subset(&self, idx: &[usize]) -> CredalDataset {
        let w = self.m * self.k;
        let mut preds = Vec::with_capacity(idx.len() * w);
        for &i in idx {
            preds.extend_from_slice(self.instance(i));
        }
        CredalDataset {
            features: self.features.select_rows(idx),
            n: idx.len(),
            m: self.m,
            k: self.k,
            predictions: preds,
            labels: self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Splits into the first `at` instances and the rest.
    pub fn split_at(&self, at: usize) -> Result<(CredalDataset, CredalDataset)> {
        if at == 0 || at >= self.n {
            return Err(Error::Domain(format!("split point {at} outside 1..{}", self.n)));
        }
        let head: Vec<usize> = (0..at).collect();
        let tail: Vec<usize> = (at..self.n).collect();
        Ok((self.subset(&head), self.subset(&tail)))
    }
}

/// Row-stochastic `N x M` matrix of evaluated weight functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix(Matrix);

impl WeightMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        for (i, row) in m.iter_rows().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) || (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::Simplex(format!("weight row {i} not in the simplex")));
            }
        }
        Ok(Self(m))
    }

    pub fn uniform(n: usize, m: usize) -> Self {
        Self(Matrix::new(n, m, vec![1.0 / m as f64; n * m]).expect("shape"))
    }

    /// Every row equal to `weights`.
    pub fn constant(n: usize, weights: &[f64]) -> Result<Self> {
        let rows: Vec<&[f64]> = (0..n).map(|_| weights).collect();
        Self::new(Matrix::from_rows(&rows)?)
    }

    /// Every row selects member `member`.
    pub fn one_hot(n: usize, m: usize, member: usize) -> Self {
        let mut out = Matrix::zeros(n, m);
        for i in 0..n {
            out.set(i, member, 1.0);
        }
        Self(out)
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn cols(&self) -> usize {
        self.0.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

/// `sum_m weights[m] * preds[m]`.
pub fn convex_combine(preds: &[ProbVector], weights: &[f64]) -> Result<ProbVector> {
    let first = preds.first().ok_or_else(|| Error::Domain("no predictions to combine".into()))?;
    if weights.len() != preds.len() {
        return Err(Error::dim("combination weights", preds.len(), weights.len()));
    }
    let k = first.len();
    let mut out = vec![0.0; k];
    for (p, &w) in preds.iter().zip(weights) {
        if p.len() != k {
            return Err(Error::dim("classes", k, p.len()));
        }
        for (o, &v) in out.iter_mut().zip(p.as_slice()) {
            *o += w * v;
        }
    }
    ProbVector::new(out)
}

/// Combined predictions `f_Lambda(x_i) = sum_m Lambda[i][m] f^(m)(x_i)`.
pub fn combine_dataset(data: &CredalDataset, weights: &WeightMatrix) -> Result<Matrix> {
    if weights.rows() != data.n() {
        return Err(Error::dim("weight rows", data.n(), weights.rows()));
    }
    if weights.cols() != data.m() {
        return Err(Error::dim("weight columns", data.m(), weights.cols()));
    }
    let mut out = Matrix::zeros(data.n(), data.k());
    for i in 0..data.n() {
        combine_row(data.instance(i), weights.row(i), data.k(), out.row_mut(i));
    }
    Ok(out)
}

/// Writes `sum_m w[m] * block[m]` into `out`; `block` is member-major `M x K`.
#[inline]
pub(crate) fn combine_row(block: &[f64], w: &[f64], k: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (member, &wm) in block.chunks_exact(k).zip(w) {
        for (o, &v) in out.iter_mut().zip(member) {
            *o += wm * v;
        }
    }
}

/// Euclidean projection of a point onto the convex hull of a vertex set.
#[derive(Debug, Clone, PartialEq)]
pub struct HullProjection {
    /// Distance from the point to the hull.
    pub distance: f64,
    /// Convex weights over the vertices attaining the projection.
    pub weights: Vec<f64>,
    /// The projected point.
    pub projection: Vec<f64>,
    /// `distance <= tol`.
    pub inside: bool,
}

/// Projects `point` onto `conv(vertices)` and reports membership.
///
/// Uses Wolfe's minimum-norm-point active-set method on the translated
/// vertices `v_m - point`, which terminates with the exact projection for
/// affinely independent corrals.
pub fn point_in_hull(point: &[f64], vertices: &[&[f64]], tol: f64) -> Result<HullProjection> {
    if vertices.is_empty() {
        return Err(Error::Domain("hull needs at least one vertex".into()));
    }
    let dim = point.len();
    if let Some(v) = vertices.iter().find(|v| v.len() != dim) {
        return Err(Error::dim("vertex", dim, v.len()));
    }
    let shifted: Vec<Vec<f64>> = vertices.iter().map(|v| v.iter().zip(point).map(|(a, b)| a - b).collect()).collect();
    let weights = min_norm_point(&shifted);
    let mut projection = vec![0.0; dim];
    for (v, &w) in vertices.iter().zip(&weights) {
        for (p, &x) in projection.iter_mut().zip(v.iter()) {
            *p += w * x;
        }
    }
    let distance = libm::sqrt(projection.iter().zip(point).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
    Ok(HullProjection { distance, weights, projection, inside: distance <= tol })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Convex weights of the minimum-norm point of `conv(points)`.
fn min_norm_point(points: &[Vec<f64>]) -> Vec<f64> {
    const EPS: f64 = 1e-14;
    let n = points.len();
    let dim = points[0].len();
    let max_sq = points.iter().map(|p| dot(p, p)).fold(0.0, f64::max);
    let scale = max_sq.max(1e-300);

    let start =
        (0..n).min_by(|&a, &b| dot(&points[a], &points[a]).total_cmp(&dot(&points[b], &points[b]))).expect("non-empty");
    let mut corral: Vec<usize> = vec![start];
    let mut lambda: Vec<f64> = vec![1.0];
    let mut x = points[start].clone();

    let combine = |corral: &[usize], lambda: &[f64]| -> Vec<f64> {
        let mut x = vec![0.0; dim];
        for (&i, &l) in corral.iter().zip(lambda) {
            for (xv, &pv) in x.iter_mut().zip(&points[i]) {
                *xv += l * pv;
            }
        }
        x
    };

    for _ in 0..(50 * (n + dim) + 100) {
        let xx = dot(&x, &x);
        let (j, xj) = (0..n).map(|i| (i, dot(&x, &points[i]))).min_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty");
        if xx - xj <= 1e-12 * scale || corral.contains(&j) {
            break;
        }
        // A duplicate of a corral point would make the corral affinely dependent.
        if corral
            .iter()
            .any(|&c| points[c].iter().zip(&points[j]).all(|(a, b)| (a - b).abs() <= 1e-15 * (1.0 + a.abs())))
        {
            break;
        }
        corral.push(j);
        lambda.push(0.0);

        // Minor cycles.
        loop {
            let Some(alpha) = affine_minimizer(points, &corral) else {
                // Numerically dependent corral: drop the newcomer and stop.
                corral.pop();
                lambda.pop();
                return scatter(n, &corral, &lambda);
            };
            if alpha.iter().all(|&a| a > EPS) {
                lambda = alpha;
                x = combine(&corral, &lambda);
                break;
            }
            let mut theta = 1.0f64;
            for (&l, &a) in lambda.iter().zip(&alpha) {
                if a <= EPS && l - a > 0.0 {
                    theta = theta.min(l / (l - a));
                }
            }
            for (l, &a) in lambda.iter_mut().zip(&alpha) {
                *l = theta * a + (1.0 - theta) * *l;
            }
            // Drop vanished weights; always drop at least the smallest one.
            let min_pos =
                lambda.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).expect("non-empty corral");
            let mut keep_c = Vec::with_capacity(corral.len());
            let mut keep_l = Vec::with_capacity(corral.len());
            for (idx, (&c, &l)) in corral.iter().zip(&lambda).enumerate() {
                if idx != min_pos && l > EPS {
                    keep_c.push(c);
                    keep_l.push(l);
                }
            }
            corral = keep_c;
            let total: f64 = keep_l.iter().sum();
            lambda = keep_l.into_iter().map(|l| l / total).collect();
            x = combine(&corral, &lambda);
            if corral.len() == 1 {
                break;
            }
        }
    }
    scatter(n, &corral, &lambda)
}

fn scatter(n: usize, corral: &[usize], lambda: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; n];
    for (&c, &l) in corral.iter().zip(lambda) {
        w[c] = l;
    }
    w
}

/// Minimizes `|sum_i a_i p_i|^2` subject to `sum_i a_i = 1` over the corral.
fn affine_minimizer(points: &[Vec<f64>], corral: &[usize]) -> Option<Vec<f64>> {
    let s = corral.len();
    if s == 1 {
        return Some(vec![1.0]);
    }
    // Bordered system [G 1; 1^T 0] [a; mu] = [0; 1].
    let size = s + 1;
    let mut a = vec![0.0; size * size];
    let mut b = vec![0.0; size];
    for r in 0..s {
        for c in 0..s {
            a[r * size + c] = dot(&points[corral[r]], &points[corral[c]]);
        }
        a[r * size + s] = 1.0;
        a[s * size + r] = 1.0;
    }
    b[s] = 1.0;
    let sol = linalg::solve_dense(&mut a, &mut b, size)?;
    Some(sol[..s].to_vec())
}
