//! Tagged-data regression algorithms behind one pluggable interface: least
//! squares, weighted least squares, linear drift, and autoregressive fits.
//! Tags carry side information (a regression weight, a time index, or an
//! order marker) that non-symmetric algorithms may consume.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-10;

/// One observation: features, response, and a tag.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedPoint {
    pub x: Vec<f64>,
    pub y: f64,
    pub tag: f64,
}

/// An ordered sequence of tagged points with a consistent feature dimension.
/// Stored column-major-free (flat row-major features) so per-step clones in
/// the sequential harness stay cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedDataset {
    dim: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
    tags: Vec<f64>,
}

impl TaggedDataset {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            xs: Vec::new(),
            ys: Vec::new(),
            tags: Vec::new(),
        }
    }

    pub fn from_points(points: &[TaggedPoint]) -> Result<Self> {
        let dim = points.first().map(|p| p.x.len()).unwrap_or(0);
        let mut out = Self::new(dim);
        for p in points {
            out.push(&p.x, p.y, p.tag)?;
        }
        Ok(out)
    }

    /// Builds a dataset from parallel slices, assigning tags 1..n when
    /// `tags` is `None`.
    pub fn from_rows(rows: &[(Vec<f64>, f64)], tags: Option<&[f64]>) -> Result<Self> {
        let dim = rows.first().map(|(x, _)| x.len()).unwrap_or(0);
        let mut out = Self::new(dim);
        for (i, (x, y)) in rows.iter().enumerate() {
            let tag = match tags {
                Some(t) => t[i],
                None => (i + 1) as f64,
            };
            out.push(x, *y, tag)?;
        }
        Ok(out)
    }

    pub fn push(&mut self, x: &[f64], y: f64, tag: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::dimension(format!(
                "point has {} features, dataset has {}",
                x.len(),
                self.dim
            )));
        }
        if !tag.is_finite() {
            return Err(Error::domain(format!("tag {tag} is not finite")));
        }
        self.xs.extend_from_slice(x);
        self.ys.push(y);
        self.tags.push(tag);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.ys[i]
    }

    pub fn tag(&self, i: usize) -> f64 {
        self.tags[i]
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn tags(&self) -> &[f64] {
        &self.tags
    }

    pub fn set_y(&mut self, i: usize, y: f64) {
        self.ys[i] = y;
    }

    pub fn set_tag(&mut self, i: usize, tag: f64) {
        self.tags[i] = tag;
    }

    /// Exchanges the (x, y) payloads at positions `i` and `j` while the tags
    /// stay attached to the positions.
    pub fn swap_xy(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        self.ys.swap(i, j);
        let d = self.dim;
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let (head, tail) = self.xs.split_at_mut(hi * d);
        head[lo * d..(lo + 1) * d].swap_with_slice(&mut tail[..d]);
    }

    pub fn point(&self, i: usize) -> TaggedPoint {
        TaggedPoint {
            x: self.x(i).to_vec(),
            y: self.y(i),
            tag: self.tag(i),
        }
    }
}

/// The dataset Z^k: (x, y) payloads at positions k and n+1 exchanged while
/// tags stay attached to positions. The input carries the test point in its
/// last position; `k` is 1-based and k = n+1 is the identity.
pub fn swap_points(data: &TaggedDataset, k: usize) -> Result<TaggedDataset> {
    let m = data.len();
    if k == 0 || k > m {
        return Err(Error::domain(format!("swap index {k} outside [1, {m}]")));
    }
    let mut out = data.clone();
    out.swap_xy(k - 1, m - 1);
    Ok(out)
}

/// A fitted regression function; deterministic and total on R^p. AR models
/// capture the trailing responses at fit time, so `predict` takes only x.
#[derive(Clone)]
pub struct FittedModel {
    predict: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    rank_deficient: bool,
}

impl FittedModel {
    pub fn new(predict: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            predict: Arc::new(predict),
            rank_deficient: false,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        (self.predict)(x)
    }

    /// True when the design was degenerate and a minimal-norm solution was
    /// substituted.
    pub fn rank_deficient(&self) -> bool {
        self.rank_deficient
    }
}

impl std::fmt::Debug for FittedModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FittedModel")
            .field("rank_deficient", &self.rank_deficient)
            .finish()
    }
}

/// A model-fitting algorithm over tagged datasets.
pub trait TaggedAlgorithm: Send + Sync {
    fn fit(&self, data: &TaggedDataset) -> Result<FittedModel>;

    /// True iff the fit ignores tags and point order entirely.
    fn is_symmetric(&self) -> bool {
        false
    }

    /// True iff the fitted predictions (hence signed residuals) are affine in
    /// any single response value, enabling the two-fit fast path in full
    /// conformal.
    fn linear_in_y(&self) -> bool {
        false
    }
}

/// Solves min ||Xb - y|| via the normal equations, falling back to an SVD
/// minimal-norm solution when the Gram matrix is not positive definite.
fn solve_lstsq(design: &DMatrix<f64>, rhs: &DVector<f64>) -> (DVector<f64>, bool) {
    let gram = design.transpose() * design;
    let gy = design.transpose() * rhs;
    if let Some(chol) = gram.clone().cholesky() {
        return (chol.solve(&gy), false);
    }
    let svd = design.clone().svd(true, true);
    let eps = RANK_TOL * svd.singular_values.max();
    let sol = svd
        .solve(rhs, eps)
        .expect("svd computed with both sets of vectors");
    (sol, true)
}

fn coef_model(beta: DVector<f64>, rank_deficient: bool) -> FittedModel {
    let coefs: Vec<f64> = beta.iter().copied().collect();
    let mut model = FittedModel::new(move |x: &[f64]| {
        coefs.iter().zip(x).map(|(b, v)| b * v).sum()
    });
    model.rank_deficient = rank_deficient;
    model
}

/// Ordinary least squares; rank-deficient designs yield the minimal-norm
/// coefficient vector. Tags are ignored.
pub fn fit_least_squares(data: &TaggedDataset) -> Result<FittedModel> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = data.len();
    let p = data.dim();
    let design = DMatrix::from_fn(n, p, |i, j| data.x(i)[j]);
    let rhs = DVector::from_fn(n, |i, _| data.y(i));
    let (beta, deficient) = solve_lstsq(&design, &rhs);
    Ok(coef_model(beta, deficient))
}

/// Weighted least squares with the tags as regression weights: minimizes
/// sum_i t_i (y_i - x_i' b)^2.
pub fn fit_weighted_least_squares(data: &TaggedDataset) -> Result<FittedModel> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut any_positive = false;
    for i in 0..data.len() {
        let t = data.tag(i);
        if t < 0.0 {
            return Err(Error::domain(format!("negative regression weight {t}")));
        }
        any_positive |= t > 0.0;
    }
    if !any_positive {
        return Err(Error::domain("all regression weights are zero"));
    }
    let n = data.len();
    let p = data.dim();
    let design = DMatrix::from_fn(n, p, |i, j| data.tag(i).sqrt() * data.x(i)[j]);
    let rhs = DVector::from_fn(n, |i, _| data.tag(i).sqrt() * data.y(i));
    let (beta, deficient) = solve_lstsq(&design, &rhs);
    Ok(coef_model(beta, deficient))
}

/// Least squares with a drift term in the tags: minimizes
/// sum_i (y_i - x_i' b - g * tag_i)^2 and predicts at `prediction_tag`
/// (defaulting to max tag + 1).
pub fn fit_linear_drift(data: &TaggedDataset, prediction_tag: Option<f64>) -> Result<FittedModel> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = data.len();
    let p = data.dim();
    let design = DMatrix::from_fn(n, p + 1, |i, j| {
        if j < p {
            data.x(i)[j]
        } else {
            data.tag(i)
        }
    });
    let rhs = DVector::from_fn(n, |i, _| data.y(i));
    let (beta, deficient) = solve_lstsq(&design, &rhs);
    let at_tag = prediction_tag
        .unwrap_or_else(|| data.tags().iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0);
    let coefs: Vec<f64> = beta.iter().copied().collect();
    let mut model = FittedModel::new(move |x: &[f64]| {
        let base: f64 = coefs[..p].iter().zip(x).map(|(b, v)| b * v).sum();
        base + coefs[p] * at_tag
    });
    model.rank_deficient = deficient;
    Ok(model)
}

/// Autoregressive least squares over rows i > k: minimizes
/// sum_i (y_i - x_i' b - (y_{i-1},...,y_{i-k})' g)^2. Points must be ordered
/// by tag; the trailing k responses are captured at fit time so the returned
/// model predicts from features alone.
pub fn fit_autoregressive(data: &TaggedDataset, lags: usize) -> Result<FittedModel> {
    let n = data.len();
    if n <= lags {
        return Err(Error::domain(format!(
            "autoregressive fit needs n > k; got n = {n}, k = {lags}"
        )));
    }
    if lags == 0 {
        return fit_least_squares(data);
    }
    let p = data.dim();
    let rows = n - lags;
    let design = DMatrix::from_fn(rows, p + lags, |r, j| {
        let i = r + lags; // 0-based row index into the data
        if j < p {
            data.x(i)[j]
        } else {
            data.y(i - 1 - (j - p))
        }
    });
    let rhs = DVector::from_fn(rows, |r, _| data.y(r + lags));
    let (beta, deficient) = solve_lstsq(&design, &rhs);
    let trailing: Vec<f64> = (0..lags).map(|j| data.y(n - 1 - j)).collect();
    let coefs: Vec<f64> = beta.iter().copied().collect();
    let mut model = FittedModel::new(move |x: &[f64]| {
        let base: f64 = coefs[..p].iter().zip(x).map(|(b, v)| b * v).sum();
        let ar: f64 = coefs[p..].iter().zip(&trailing).map(|(g, y)| g * y).sum();
        base + ar
    });
    model.rank_deficient = deficient;
    Ok(model)
}

/// Ordinary least squares (symmetric: tags ignored).
#[derive(Debug, Clone, Copy, Default)]
pub struct LeastSquares;

impl TaggedAlgorithm for LeastSquares {
    fn fit(&self, data: &TaggedDataset) -> Result<FittedModel> {
        fit_least_squares(data)
    }

    fn is_symmetric(&self) -> bool {
        true
    }

    fn linear_in_y(&self) -> bool {
        true
    }
}

/// Weighted least squares with tags as weights.
#[derive(Debug, Clone, Copy, Default)]
pub struct WeightedLeastSquares;

impl TaggedAlgorithm for WeightedLeastSquares {
    fn fit(&self, data: &TaggedDataset) -> Result<FittedModel> {
        fit_weighted_least_squares(data)
    }

    fn linear_in_y(&self) -> bool {
        true
    }
}

/// Least squares with a linear drift term in the tags.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearDrift {
    /// Tag at which predictions are made; `None` means max training tag + 1.
    pub prediction_tag: Option<f64>,
}

impl TaggedAlgorithm for LinearDrift {
    fn fit(&self, data: &TaggedDataset) -> Result<FittedModel> {
        fit_linear_drift(data, self.prediction_tag)
    }

    fn linear_in_y(&self) -> bool {
        true
    }
}

/// Autoregressive least squares with `lags` trailing responses as regressors.
/// Not linear in a single response: a hypothesized y also enters the lag
/// design of later rows.
#[derive(Debug, Clone, Copy)]
pub struct Autoregressive {
    pub lags: usize,
}

impl TaggedAlgorithm for Autoregressive {
    fn fit(&self, data: &TaggedDataset) -> Result<FittedModel> {
        fit_autoregressive(data, self.lags)
    }
}
