//! Synthetic credal-set scenarios with known ground truth.
//!
//! Two families are provided. `BinaryGP` draws two members from a Gaussian
//! process on `x ~ U(0, 5)`; `MulticlassDirichlet` draws `M` members per
//! instance from a Dirichlet around a random prior. In the `H0x` cases the
//! true conditional distribution is a convex combination of the members, in
//! the `H1x` cases it lies outside their convex hull, further away for
//! higher case numbers.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::random::{permutation, sample_categorical, sample_dirichlet, standard_normal, RngStream};
use crate::simplex::{combine_row, point_in_hull, CredalDataset, Matrix, ProbVector, WeightMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    BinaryGP,
    MulticlassDirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Case {
    H01,
    H02,
    H11,
    H12,
    H13,
}

impl Case {
    pub const ALL: [Case; 5] = [Case::H01, Case::H02, Case::H11, Case::H12, Case::H13];

    /// `true` for the cases in which a calibrated combination exists.
    pub fn is_null(self) -> bool {
        matches!(self, Case::H01 | Case::H02)
    }

    pub fn name(self) -> &'static str {
        match self {
            Case::H01 => "H01",
            Case::H02 => "H02",
            Case::H11 => "H11",
            Case::H12 => "H12",
            Case::H13 => "H13",
        }
    }

    /// Mixing weight of the exterior corner in the multiclass `H1x` cases.
    pub fn default_delta(self) -> f64 {
        match self {
            Case::H11 => 0.01,
            Case::H12 => 0.1,
            Case::H13 => 0.2,
            _ => 0.0,
        }
    }
}

impl core::str::FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Case::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown case {s:?}")))
    }
}

/// Parameters of one synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub family: Family,
    pub case: Case,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    /// Spread of the members around the prior (multiclass).
    pub u: f64,
    /// Exterior corner weight; `None` uses [`Case::default_delta`].
    pub delta: Option<f64>,
    /// Largest boundary offset in the binary `H11` case.
    pub epsilon_max: f64,
    pub poly_degree: usize,
    /// RBF length-scale of the binary GP paths.
    pub length_scale: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn binary(case: Case, n: usize, seed: u64) -> Self {
        Self {
            family: Family::BinaryGP,
            case,
            n,
            m: 2,
            k: 2,
            u: 0.5,
            delta: None,
            epsilon_max: 0.02,
            poly_degree: 2,
            length_scale: 1.0,
            seed,
        }
    }

    pub fn multiclass(case: Case, n: usize, m: usize, k: usize, seed: u64) -> Self {
        Self { family: Family::MulticlassDirichlet, m, k, ..Self::binary(case, n, seed) }
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or_else(|| self.case.default_delta())
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            Family::BinaryGP if self.m != 2 || self.k != 2 => {
                return Err(Error::Config(format!("BinaryGP needs M=2 and K=2, got M={} K={}", self.m, self.k)))
            }
            Family::MulticlassDirichlet if self.k < 3 => {
                return Err(Error::Config(format!("MulticlassDirichlet needs K >= 3, got {}", self.k)))
            }
            Family::MulticlassDirichlet if self.m < 1 => {
                return Err(Error::Config("MulticlassDirichlet needs M >= 1".into()))
            }
            _ => {}
        }
        if self.n < 2 {
            return Err(Error::Config(format!("N={} < 2", self.n)));
        }
        if !(self.u.is_finite() && self.u > 0.0) {
            return Err(Error::Config(format!("u={} must be positive", self.u)));
        }
        if !(0.0..=1.0).contains(&self.delta()) {
            return Err(Error::Config(format!("delta={} outside [0, 1]", self.delta())));
        }
        if !(0.0..=1.0).contains(&self.epsilon_max) {
            return Err(Error::Config(format!("epsilon_max={} outside [0, 1]", self.epsilon_max)));
        }
        if !(self.length_scale.is_finite() && self.length_scale > 0.0) {
            return Err(Error::Config(format!("length scale {} must be positive", self.length_scale)));
        }
        Ok(())
    }
}

/// True conditional distribution of a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// `N x K`, row `i` is `P(Y | x_i)`.
    pub f_star: Matrix,
    /// Weights reproducing `f_star` from the members (null cases only).
    pub lambda_star: Option<WeightMatrix>,
    /// Multiclass instances redrawn because their hull covered every corner.
    pub regenerated: usize,
}

impl GroundTruth {
    /// Euclidean distance of every `f_star` row to the hull of its members.
    pub fn hull_distances(&self, data: &CredalDataset) -> Result<Vec<f64>> {
        (0..data.n())
            .map(|i| {
                let verts: Vec<&[f64]> = (0..data.m()).map(|m| data.prediction(i, m)).collect();
                Ok(point_in_hull(self.f_star.row(i), &verts, 0.0)?.distance)
            })
            .collect()
    }
}

/// Generates a dataset of the given family.
pub fn generate(spec: &ScenarioSpec) -> Result<(CredalDataset, GroundTruth)> {
    match spec.family {
        Family::BinaryGP => generate_binary(spec),
        Family::MulticlassDirichlet => generate_multiclass(spec),
    }
}

/// Zero-mean GP prior with RBF covariance on a fixed set of inputs; the
/// Cholesky factor is computed once and reused for every path.
#[derive(Debug, Clone)]
pub struct GpSampler {
    n: usize,
    chol: Vec<f64>,
}

impl GpSampler {
    const JITTER_START: f64 = 1e-8;
    const JITTER_MAX: f64 = 1e-4;

    pub fn new(xs: &[f64], length_scale: f64) -> Result<Self> {
        let n = xs.len();
        if n < 2 {
            return Err(Error::Domain(format!("GP needs at least 2 inputs, got {n}")));
        }
        if !(length_scale.is_finite() && length_scale > 0.0) {
            return Err(Error::Domain(format!("length scale {length_scale} must be positive")));
        }
        let inv = 1.0 / (2.0 * length_scale * length_scale);
        let mut cov = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let d = xs[i] - xs[j];
                let v = libm::exp(-d * d * inv);
                cov[i * n + j] = v;
                cov[j * n + i] = v;
            }
        }
        let mut jitter = Self::JITTER_START;
        loop {
            let mut a = cov.clone();
            for i in 0..n {
                a[i * n + i] += jitter;
            }
            if let Some(chol) = linalg::cholesky(&a, n) {
                return Ok(Self { n, chol });
            }
            jitter *= 10.0;
            if jitter > Self::JITTER_MAX * 1.000_001 {
                return Err(Error::Numeric(format!(
                    "GP covariance not positive definite with jitter up to {}",
                    Self::JITTER_MAX
                )));
            }
        }
    }

    /// Unscaled path `L z`, `z ~ N(0, I)`.
    pub fn sample_raw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.n).map(|_| standard_normal(rng)).collect();
        linalg::lower_mul(&self.chol, &z, self.n)
    }

    /// Path min-max scaled onto `[0, 1]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        min_max_scale(self.sample_raw(rng))
    }
}

/// Affine map of `v` onto `[0, 1]` (all `0.5` for a constant vector).
pub fn min_max_scale(mut v: Vec<f64>) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    for x in &mut v {
        *x = if span > 0.0 { ((*x - lo) / span).clamp(0.0, 1.0) } else { 0.5 };
    }
    v
}

/// One GP path on `xs`, min-max scaled onto `[0, 1]`.
pub fn gp_sample(xs: &[f64], length_scale: f64, rng: RngStream) -> Result<Vec<f64>> {
    Ok(GpSampler::new(xs, length_scale)?.sample(&mut rng.rng()))
}

/// Random polynomial weight functions: per component, coefficients
/// `U(-1, 1)` of the given degree, evaluated on `xs`, shifted to a zero
/// minimum, offset by `1e-6` and normalized across components.
pub fn random_scaled_polynomials<R: Rng + ?Sized>(
    m: usize,
    degree: usize,
    xs: &[f64],
    rng: &mut R,
) -> Result<WeightMatrix> {
    if m == 0 {
        return Err(Error::Domain("M must be positive".into()));
    }
    let n = xs.len();
    let mut out = Matrix::zeros(n, m);
    for c in 0..m {
        let coef: Vec<f64> = (0..=degree).map(|_| rng.random_range(-1.0..1.0)).collect();
        let vals: Vec<f64> = xs.iter().map(|&x| coef.iter().rev().fold(0.0, |acc, &b| acc * x + b)).collect();
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        for (i, v) in vals.into_iter().enumerate() {
            out.set(i, c, v - min + 1e-6);
        }
    }
    for i in 0..n {
        let row = out.row_mut(i);
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    WeightMatrix::new(out)
}

fn uniform_xs(n: usize, stream: RngStream) -> Vec<f64> {
    let mut r = stream.rng();
    (0..n).map(|_| r.random_range(0.0..5.0)).collect()
}

fn draw_labels(f_star: &Matrix, stream: RngStream) -> Vec<usize> {
    let mut r = stream.rng();
    f_star.iter_rows().map(|p| sample_categorical(p, &mut r)).collect()
}

fn xs_matrix(xs: &[f64]) -> Matrix {
    Matrix::new(xs.len(), 1, xs.to_vec()).expect("one column")
}

/// Places a point `offset` beyond `[lo, hi]` on the preferred side, switching
/// sides or shrinking the offset when the unit interval leaves no room.
fn place_outside(lo: f64, hi: f64, offset: f64, above: bool) -> f64 {
    let (room_up, room_down) = (1.0 - hi, lo);
    let up = if above { room_up >= offset || room_up >= room_down } else { room_down < offset && room_up > room_down };
    if up {
        hi + offset.min(room_up)
    } else {
        lo - offset.min(room_down)
    }
}

/// Binary scenario: two GP members on `x ~ U(0, 5)`.
///
/// Member and ground-truth values are probabilities of the first class.
pub fn generate_binary(spec: &ScenarioSpec) -> Result<(CredalDataset, GroundTruth)> {
    spec.validate()?;
    if spec.family != Family::BinaryGP {
        return Err(Error::Config("generate_binary needs the BinaryGP family".into()));
    }
    let root = RngStream::from_seed(spec.seed);
    let n = spec.n;
    let xs = uniform_xs(n, root.substream(0));
    let gp = GpSampler::new(&xs, spec.length_scale)?;
    let mut paths = root.substream(1).rng();
    let f1 = gp.sample(&mut paths);
    let f2 = gp.sample(&mut paths);
    let mut aux = root.substream(2).rng();

    let mut lambda = None;
    let star: Vec<f64> = match spec.case {
        Case::H01 => {
            let c: f64 = aux.random();
            lambda = Some(WeightMatrix::constant(n, &[c, 1.0 - c])?);
            (0..n).map(|i| c * f1[i] + (1.0 - c) * f2[i]).collect()
        }
        Case::H02 => {
            let w = random_scaled_polynomials(2, spec.poly_degree, &xs, &mut aux)?;
            let s = (0..n).map(|i| w.row(i)[0] * f1[i] + w.row(i)[1] * f2[i]).collect();
            lambda = Some(w);
            s
        }
        Case::H11 => (0..n)
            .map(|i| {
                let eps = spec.epsilon_max * (1.0 - aux.random::<f64>());
                let above = aux.random::<bool>();
                place_outside(f1[i].min(f2[i]), f1[i].max(f2[i]), eps, above)
            })
            .collect(),
        Case::H12 | Case::H13 => {
            let ratio = if spec.case == Case::H12 { 0.05 } else { 0.15 };
            let side = gp.sample(&mut aux);
            let magnitude = gp.sample(&mut aux);
            (0..n)
                .map(|i| {
                    let (lo, hi) = (f1[i].min(f2[i]), f1[i].max(f2[i]));
                    let offset = ratio * (hi - lo) * (0.5 + 0.5 * magnitude[i]);
                    place_outside(lo, hi, offset, side[i] >= 0.5 * (lo + hi))
                })
                .collect()
        }
    };

    let f_star = Matrix::new(n, 2, star.iter().flat_map(|&p| [p, 1.0 - p]).collect())?;
    let labels = draw_labels(&f_star, root.substream(3));
    let preds: Vec<f64> = (0..n).flat_map(|i| [f1[i], 1.0 - f1[i], f2[i], 1.0 - f2[i]]).collect();
    let data = CredalDataset::new(xs_matrix(&xs), 2, 2, preds, Some(labels))?;
    Ok((data, GroundTruth { f_star, lambda_star: lambda, regenerated: 0 }))
}

/// Multiclass scenario: per instance a prior `p ~ Dir(1)` and members
/// `Dir(p K / u)`; the feature is `x ~ U(0, 5)`.
pub fn generate_multiclass(spec: &ScenarioSpec) -> Result<(CredalDataset, GroundTruth)> {
    spec.validate()?;
    if spec.family != Family::MulticlassDirichlet {
        return Err(Error::Config("generate_multiclass needs the MulticlassDirichlet family".into()));
    }
    let (n, m, k) = (spec.n, spec.m, spec.k);
    let root = RngStream::from_seed(spec.seed);
    let xs = uniform_xs(n, root.substream(0));
    let ones = vec![1.0; k];
    let draw_members = |r: &mut crate::random::SimRng| -> Result<Vec<ProbVector>> {
        let p = sample_dirichlet(&ones, r)?;
        let alpha: Vec<f64> = p.as_slice().iter().map(|&v| (v * k as f64 / spec.u).max(f64::MIN_POSITIVE)).collect();
        (0..m).map(|_| sample_dirichlet(&alpha, r)).collect()
    };

    let mut members: Vec<Vec<ProbVector>> = Vec::with_capacity(n);
    let mut f_star = Matrix::zeros(n, k);
    let mut lambda = None;
    let mut regenerated = 0;
    let instances = root.substream(1);
    match spec.case {
        Case::H01 | Case::H02 => {
            for i in 0..n {
                members.push(draw_members(&mut instances.substream(i as u64).rng())?);
            }
            let mut aux = root.substream(2).rng();
            let w = if spec.case == Case::H01 {
                let c = if m == 1 { vec![1.0] } else { sample_dirichlet(&vec![1.0; m], &mut aux)?.into_vec() };
                WeightMatrix::constant(n, &c)?
            } else {
                random_scaled_polynomials(m, spec.poly_degree, &xs, &mut aux)?
            };
            let mut flat = vec![0.0; m * k];
            for (i, row) in members.iter().enumerate() {
                for (c, p) in row.iter().enumerate() {
                    flat[c * k..(c + 1) * k].copy_from_slice(p.as_slice());
                }
                combine_row(&flat, w.row(i), k, f_star.row_mut(i));
            }
            lambda = Some(w);
        }
        Case::H11 | Case::H12 | Case::H13 => {
            let delta = spec.delta();
            for i in 0..n {
                let mut r = instances.substream(i as u64).rng();
                let mut attempts = 0usize;
                loop {
                    let ms = draw_members(&mut r)?;
                    let verts: Vec<&[f64]> = ms.iter().map(ProbVector::as_slice).collect();
                    let mut found = None;
                    for c in permutation(k, &mut r) {
                        let corner = ProbVector::one_hot(k, c)?;
                        let proj = point_in_hull(corner.as_slice(), &verts, 1e-9)?;
                        if !proj.inside {
                            found = Some((corner, proj.projection));
                            break;
                        }
                    }
                    if let Some((corner, fb)) = found {
                        for (o, (&c, &b)) in f_star.row_mut(i).iter_mut().zip(corner.as_slice().iter().zip(&fb)) {
                            *o = delta * c + (1.0 - delta) * b;
                        }
                        members.push(ms);
                        break;
                    }
                    regenerated += 1;
                    attempts += 1;
                    if attempts > 10_000 {
                        return Err(Error::Numeric(format!(
                            "instance {i}: member hull covers every corner in 10000 draws"
                        )));
                    }
                }
            }
        }
    }
    for i in 0..n {
        let row = f_star.row_mut(i);
        row.iter_mut().for_each(|v| *v = v.max(0.0));
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    let labels = draw_labels(&f_star, root.substream(3));
    let data = CredalDataset::from_members(xs_matrix(&xs), &members, Some(labels))?;
    Ok((data, GroundTruth { f_star, lambda_star: lambda, regenerated }))
}
