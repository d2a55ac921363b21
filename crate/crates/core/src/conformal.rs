//! Weighted split conformal, full conformal, and jackknife+ prediction
//! regions, their general-score variants, and the classic unweighted
//! specializations (implemented independently via order statistics).

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ext_real::ExtReal;
use crate::regression::{swap_points, FittedModel, TaggedAlgorithm, TaggedDataset};
use crate::weights::{draw_swap_index, DiscreteDistribution, WeightProfile, QUANTILE_EPS};

/// A general nonconformity score S(x, y), deterministic and total.
#[derive(Clone)]
pub struct ScoreFunction {
    score: Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>,
}

impl ScoreFunction {
    pub fn new(score: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            score: Arc::new(score),
        }
    }

    pub fn score(&self, x: &[f64], y: f64) -> f64 {
        (self.score)(x, y)
    }
}

/// Fits a score function to a tagged dataset; the full-conformal score
/// variant refits this on every swapped, augmented dataset.
pub type ScoreAlgorithm = Arc<dyn Fn(&TaggedDataset) -> Result<ScoreFunction> + Send + Sync>;

type Tester = Arc<dyn Fn(f64) -> bool + Send + Sync>;

/// The shape of a prediction region: a closed interval with extended-real
/// endpoints, or a grid of candidates with a membership mask.
#[derive(Clone)]
pub enum RegionKind {
    Interval { lower: ExtReal, upper: ExtReal },
    GridSet { grid: Vec<f64>, mask: Vec<bool>, cell: f64 },
}

/// A prediction region with an exact membership test. For grid-set regions
/// `contains` re-runs the underlying membership test at the query point,
/// so coverage evaluation never depends on grid resolution.
#[derive(Clone)]
pub struct PredictionRegion {
    kind: RegionKind,
    tester: Option<Tester>,
}

impl PredictionRegion {
    pub fn interval(lower: ExtReal, upper: ExtReal) -> Self {
        Self {
            kind: RegionKind::Interval { lower, upper },
            tester: None,
        }
    }

    fn grid_set(grid: Vec<f64>, mask: Vec<bool>, cell: f64, tester: Tester) -> Self {
        debug_assert_eq!(grid.len(), mask.len());
        Self {
            kind: RegionKind::GridSet { grid, mask, cell },
            tester: Some(tester),
        }
    }

    pub fn kind(&self) -> &RegionKind {
        &self.kind
    }

    /// Exact membership at any real y.
    pub fn contains(&self, y: f64) -> bool {
        match (&self.kind, &self.tester) {
            (RegionKind::Interval { lower, upper }, _) => {
                *lower <= ExtReal::from(y) && ExtReal::from(y) <= *upper
            }
            (RegionKind::GridSet { .. }, Some(t)) => t(y),
            (RegionKind::GridSet { .. }, None) => unreachable!("grid-set without tester"),
        }
    }

    /// Lebesgue measure: interval length, or accepted-cell count times the
    /// cell length for grid sets.
    pub fn width(&self) -> f64 {
        match &self.kind {
            RegionKind::Interval { lower, upper } => match (lower, upper) {
                (ExtReal::Finite(a), ExtReal::Finite(b)) => (b - a).max(0.0),
                _ if upper < lower => 0.0,
                _ => f64::INFINITY,
            },
            RegionKind::GridSet { mask, cell, .. } => {
                mask.iter().filter(|&&m| m).count() as f64 * cell
            }
        }
    }

    /// Smallest enclosing interval; `None` for an empty grid set.
    pub fn hull(&self) -> Option<(ExtReal, ExtReal)> {
        match &self.kind {
            RegionKind::Interval { lower, upper } => {
                if upper < lower {
                    None
                } else {
                    Some((*lower, *upper))
                }
            }
            RegionKind::GridSet { grid, mask, .. } => {
                let first = mask.iter().position(|&m| m)?;
                let last = mask.iter().rposition(|&m| m)?;
                Some((ExtReal::Finite(grid[first]), ExtReal::Finite(grid[last])))
            }
        }
    }

    /// Grid values and membership mask for grid-set regions.
    pub fn grid_mask(&self) -> Option<(&[f64], &[bool])> {
        match &self.kind {
            RegionKind::GridSet { grid, mask, .. } => Some((grid, mask)),
            RegionKind::Interval { .. } => None,
        }
    }
}

impl std::fmt::Debug for PredictionRegion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.kind {
            RegionKind::Interval { lower, upper } => f
                .debug_struct("PredictionRegion")
                .field("lower", lower)
                .field("upper", upper)
                .finish(),
            RegionKind::GridSet { grid, mask, cell } => f
                .debug_struct("PredictionRegion")
                .field("grid_len", &grid.len())
                .field("accepted", &mask.iter().filter(|&&m| m).count())
                .field("cell", cell)
                .finish(),
        }
    }
}

/// A sorted grid of candidate response values for full-conformal search.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    values: Vec<f64>,
    cell: f64,
}

impl GridSpec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("grid must be nonempty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("grid values must be finite"));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("grid must be strictly increasing"));
        }
        let cell = if values.len() > 1 {
            (values[values.len() - 1] - values[0]) / (values.len() - 1) as f64
        } else {
            0.0
        };
        Ok(Self { values, cell })
    }

    pub fn linear(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count < 2 || !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::domain(format!(
                "invalid grid range [{lo}, {hi}] with {count} points"
            )));
        }
        let step = (hi - lo) / (count - 1) as f64;
        Self::new((0..count).map(|i| lo + step * i as f64).collect())
    }

    /// Default grid: `count` equally spaced candidates spanning the observed
    /// responses extended by half their range on each side.
    pub fn default_for(ys: &[f64], count: usize) -> Result<Self> {
        if ys.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        let pad = if range > 0.0 { 0.5 * range } else { 0.5 };
        Self::linear(lo - pad, hi + pad, count)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha {alpha} outside (0, 1)")));
    }
    Ok(())
}

/// Weighted split conformal: the interval centered at the point prediction
/// with half-width the (1 - alpha)-quantile of the weighted residual
/// distribution augmented by mass at +infinity.
pub fn split_conformal(
    residuals: &[f64],
    point_prediction: f64,
    profile: &WeightProfile,
    alpha: f64,
) -> Result<PredictionRegion> {
    check_alpha(alpha)?;
    if residuals.len() != profile.n() {
        return Err(Error::dimension(format!(
            "{} residuals for a profile of length {}",
            residuals.len(),
            profile.n()
        )));
    }
    if residuals.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::domain("residuals must be finite and nonnegative"));
    }
    let masses = &profile.normalized()[..profile.n()];
    let dist = DiscreteDistribution::from_weighted_values(
        residuals,
        masses,
        Some((ExtReal::PosInf, profile.test_weight())),
    )?;
    let q = dist.quantile(1.0 - alpha)?;
    Ok(match q {
        ExtReal::Finite(h) => PredictionRegion::interval(
            ExtReal::Finite(point_prediction - h),
            ExtReal::Finite(point_prediction + h),
        ),
        _ => PredictionRegion::interval(ExtReal::NegInf, ExtReal::PosInf),
    })
}

/// Split conformal with a general nonconformity score: accepts y iff
/// score_at(y) does not exceed the weighted calibration-score quantile.
pub fn split_conformal_scores(
    scores: &[f64],
    score_at: impl Fn(f64) -> f64 + Send + Sync + 'static,
    profile: &WeightProfile,
    alpha: f64,
    grid: &GridSpec,
) -> Result<PredictionRegion> {
    check_alpha(alpha)?;
    if scores.len() != profile.n() {
        return Err(Error::dimension(format!(
            "{} scores for a profile of length {}",
            scores.len(),
            profile.n()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::domain("calibration scores must be finite"));
    }
    let masses = &profile.normalized()[..profile.n()];
    let dist = DiscreteDistribution::from_weighted_values(
        scores,
        masses,
        Some((ExtReal::PosInf, profile.test_weight())),
    )?;
    let q = dist.quantile(1.0 - alpha)?;
    let mask: Vec<bool> = grid
        .values()
        .iter()
        .map(|&y| ExtReal::Finite(score_at(y)) <= q)
        .collect();
    let tester: Tester = Arc::new(move |y: f64| ExtReal::Finite(score_at(y)) <= q);
    Ok(PredictionRegion::grid_set(
        grid.values().to_vec(),
        mask,
        grid.cell(),
        tester,
    ))
}

/// Membership of a hypothesized y in the full-conformal set, for a fixed
/// swap index k (1-based, k = n+1 meaning no swap). Fits the algorithm on
/// the augmented dataset with payloads k and n+1 exchanged, then compares
/// the test residual against the weighted quantile of all n+1 residuals.
/// The quantile membership reduces to a strict-mass comparison: y is
/// accepted iff the weight of training residuals strictly below the test
/// residual stays under 1 - alpha.
fn full_membership(
    train: &TaggedDataset,
    test_x: &[f64],
    test_tag: f64,
    alg: &dyn TaggedAlgorithm,
    weights: &[f64],
    tau: f64,
    k: usize,
    y: f64,
) -> Result<bool> {
    let mut aug = train.clone();
    aug.push(test_x, y, test_tag)?;
    let swapped = swap_points(&aug, k)?;
    let model = alg.fit(&swapped)?;
    let r_test = (y - model.predict(test_x)).abs();
    let mut mass = 0.0;
    for i in 0..train.len() {
        if (train.y(i) - model.predict(train.x(i))).abs() < r_test {
            mass += weights[i];
        }
    }
    Ok(mass < tau - QUANTILE_EPS)
}

/// Scored analogue of `full_membership`: refits the score function on the
/// swapped augmented data and compares scores at the original points.
fn full_membership_scores(
    train: &TaggedDataset,
    test_x: &[f64],
    test_tag: f64,
    score_alg: &ScoreAlgorithm,
    weights: &[f64],
    tau: f64,
    k: usize,
    y: f64,
) -> Result<bool> {
    let mut aug = train.clone();
    aug.push(test_x, y, test_tag)?;
    let swapped = swap_points(&aug, k)?;
    let score = score_alg(&swapped)?;
    let s_test = score.score(test_x, y);
    let mut mass = 0.0;
    for i in 0..train.len() {
        if score.score(train.x(i), train.y(i)) < s_test {
            mass += weights[i];
        }
    }
    Ok(mass < tau - QUANTILE_EPS)
}

fn validate_full_inputs(
    train: &TaggedDataset,
    test_x: &[f64],
    profile: &WeightProfile,
    alpha: f64,
) -> Result<()> {
    check_alpha(alpha)?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if test_x.len() != train.dim() {
        return Err(Error::dimension(format!(
            "test point has {} features, training data has {}",
            test_x.len(),
            train.dim()
        )));
    }
    if profile.n() != train.len() {
        return Err(Error::dimension(format!(
            "profile length {} does not match n = {}",
            profile.n(),
            train.len()
        )));
    }
    Ok(())
}

/// Weighted full conformal. Draws the swap index K once from the normalized
/// weights, then tests every grid candidate (and, through `contains`, any
/// real y) for membership under that same K.
///
/// With `fast_path` and an algorithm whose fits are affine in a single
/// response, membership over all of R is resolved exactly from two probe
/// fits instead of one refit per candidate.
#[allow(clippy::too_many_arguments)]
pub fn full_conformal(
    train: &TaggedDataset,
    test_x: &[f64],
    test_tag: f64,
    alg: Arc<dyn TaggedAlgorithm>,
    profile: &WeightProfile,
    alpha: f64,
    grid: &GridSpec,
    rng: &mut ChaCha8Rng,
    fast_path: bool,
) -> Result<PredictionRegion> {
    validate_full_inputs(train, test_x, profile, alpha)?;
    let k = draw_swap_index(profile, rng).k;
    full_conformal_with_k(train, test_x, test_tag, alg, profile, alpha, grid, k, fast_path)
}

/// `full_conformal` with the swap index fixed by the caller; exposed so that
/// reduction identities and oracle comparisons can quantify over K.
#[allow(clippy::too_many_arguments)]
pub fn full_conformal_with_k(
    train: &TaggedDataset,
    test_x: &[f64],
    test_tag: f64,
    alg: Arc<dyn TaggedAlgorithm>,
    profile: &WeightProfile,
    alpha: f64,
    grid: &GridSpec,
    k: usize,
    fast_path: bool,
) -> Result<PredictionRegion> {
    validate_full_inputs(train, test_x, profile, alpha)?;
    let n = train.len();
    if k == 0 || k > n + 1 {
        return Err(Error::domain(format!("swap index {k} outside [1, {}]", n + 1)));
    }
    let weights = profile.normalized()[..n].to_vec();
    let tau = 1.0 - alpha;

    let mask: Vec<bool> = if fast_path && alg.linear_in_y() {
        fast_mask(train, test_x, test_tag, alg.as_ref(), &weights, tau, k, grid)?
    } else {
        grid.values()
            .iter()
            .map(|&y| full_membership(train, test_x, test_tag, alg.as_ref(), &weights, tau, k, y))
            .collect::<Result<_>>()?
    };

    let tester_train = train.clone();
    let tester_x = test_x.to_vec();
    let tester: Tester = Arc::new(move |y: f64| {
        full_membership(
            &tester_train,
            &tester_x,
            test_tag,
            alg.as_ref(),
            &weights,
            tau,
            k,
            y,
        )
        .unwrap_or(false)
    });
    Ok(PredictionRegion::grid_set(
        grid.values().to_vec(),
        mask,
        grid.cell(),
        tester,
    ))
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Sign of c + d*y as y -> -infinity.
fn sign_at_neg_inf(c: f64, d: f64) -> i8 {
    if d != 0.0 {
        -sign(d)
    } else {
        sign(c)
    }
}

/// Exact membership mask for algorithms affine in the hypothesized response.
///
/// Two probe fits (y = 0 and y = 1) pin down every signed residual as an
/// affine function s_i(y). The comparison |s_i| < |s_test| flips only at
/// roots of (s_i - s_test) and (s_i + s_test), so a single sweep over the
/// sorted roots yields the membership decision on every open segment; grid
/// points are then classified by binary search.
#[allow(clippy::too_many_arguments)]
fn fast_mask(
    train: &TaggedDataset,
    test_x: &[f64],
    test_tag: f64,
    alg: &dyn TaggedAlgorithm,
    weights: &[f64],
    tau: f64,
    k: usize,
    grid: &GridSpec,
) -> Result<Vec<bool>> {
    let n = train.len();
    let mut base = train.clone();
    base.push(test_x, 0.0, test_tag)?;
    let mut base = swap_points(&base, k)?;
    // After the swap the hypothesized response sits at position k-1 (or
    // stays last when k = n+1).
    let y_pos = if k <= n { k - 1 } else { n };

    base.set_y(y_pos, 0.0);
    let m0 = alg.fit(&base)?;
    base.set_y(y_pos, 1.0);
    let m1 = alg.fit(&base)?;

    // Signed residual s_i(y) = a[i] + b[i]*y at the original points; the
    // test point's residual is s(y) = ta + tb*y.
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for i in 0..n {
        let p0 = m0.predict(train.x(i));
        let p1 = m1.predict(train.x(i));
        a.push(train.y(i) - p0);
        b.push(-(p1 - p0));
    }
    let q0 = m0.predict(test_x);
    let q1 = m1.predict(test_x);
    let ta = -q0;
    let tb = 1.0 - (q1 - q0);

    // Factor lines f_i = s_i - s_test and g_i = s_i + s_test; the indicator
    // |s_i| < |s_test| equals sign(f_i)*sign(g_i) < 0.
    let mut lines = Vec::with_capacity(n); // (fc, fd, gc, gd)
    let mut events: Vec<(f64, usize, u8)> = Vec::new();
    for i in 0..n {
        let (fc, fd) = (a[i] - ta, b[i] - tb);
        let (gc, gd) = (a[i] + ta, b[i] + tb);
        if fd != 0.0 {
            events.push((-fc / fd, i, 0));
        }
        if gd != 0.0 {
            events.push((-gc / gd, i, 1));
        }
        lines.push((fc, fd, gc, gd));
    }
    events.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut sf: Vec<i8> = lines.iter().map(|l| sign_at_neg_inf(l.0, l.1)).collect();
    let mut sg: Vec<i8> = lines.iter().map(|l| sign_at_neg_inf(l.2, l.3)).collect();
    let ind = |sf: i8, sg: i8| (sf as i32) * (sg as i32) < 0;
    let mut mass: f64 = (0..n).filter(|&i| ind(sf[i], sg[i])).map(|i| weights[i]).sum();

    let mut cuts: Vec<f64> = Vec::new();
    let mut seg_accept: Vec<bool> = vec![mass < tau - QUANTILE_EPS];
    let mut e = 0;
    while e < events.len() {
        let r = events[e].0;
        while e < events.len() && events[e].0 == r {
            let (_, i, factor) = events[e];
            let before = ind(sf[i], sg[i]);
            // Past its root, a line's sign equals the sign of its slope.
            if factor == 0 {
                sf[i] = sign(lines[i].1);
            } else {
                sg[i] = sign(lines[i].3);
            }
            let after = ind(sf[i], sg[i]);
            if before != after {
                mass += if after { weights[i] } else { -weights[i] };
            }
            e += 1;
        }
        cuts.push(r);
        seg_accept.push(mass < tau - QUANTILE_EPS);
    }

    let mask = grid
        .values()
        .iter()
        .map(|&y| {
            let idx = cuts.partition_point(|&c| c < y);
            if idx < cuts.len() && cuts[idx] == y {
                // Exactly on a breakpoint: decide directly from the lines.
                let s_test = (ta + tb * y).abs();
                let m: f64 = (0..n)
                    .filter(|&i| (a[i] + b[i] * y).abs() < s_test)
                    .map(|i| weights[i])
                    .sum();
                m < tau - QUANTILE_EPS
            } else {
                seg_accept[idx]
            }
        })
        .collect();
    Ok(mask)
}

/// Full conformal with a general nonconformity score; no fast path.
#[allow(clippy::too_many_arguments)]
pub fn full_conformal_scores(
    train: &TaggedDataset,
    test_x: &[f64],
    test_tag: f64,
    score_alg: ScoreAlgorithm,
    profile: &WeightProfile,
    alpha: f64,
    grid: &GridSpec,
    rng: &mut ChaCha8Rng,
) -> Result<PredictionRegion> {
    validate_full_inputs(train, test_x, profile, alpha)?;
    let k = draw_swap_index(profile, rng).k;
    full_conformal_scores_with_k(train, test_x, test_tag, score_alg, profile, alpha, grid, k)
}

/// `full_conformal_scores` with the swap index fixed by the caller.
#[allow(clippy::too_many_arguments)]
pub fn full_conformal_scores_with_k(
    train: &TaggedDataset,
    test_x: &[f64],
    test_tag: f64,
    score_alg: ScoreAlgorithm,
    profile: &WeightProfile,
    alpha: f64,
    grid: &GridSpec,
    k: usize,
) -> Result<PredictionRegion> {
    validate_full_inputs(train, test_x, profile, alpha)?;
    let n = train.len();
    if k == 0 || k > n + 1 {
        return Err(Error::domain(format!("swap index {k} outside [1, {}]", n + 1)));
    }
    let weights = profile.normalized()[..n].to_vec();
    let tau = 1.0 - alpha;
    let mask: Vec<bool> = grid
        .values()
        .iter()
        .map(|&y| {
            full_membership_scores(train, test_x, test_tag, &score_alg, &weights, tau, k, y)
        })
        .collect::<Result<_>>()?;
    let tester_train = train.clone();
    let tester_x = test_x.to_vec();
    let tester: Tester = Arc::new(move |y: f64| {
        full_membership_scores(
            &tester_train,
            &tester_x,
            test_tag,
            &score_alg,
            &weights,
            tau,
            k,
            y,
        )
        .unwrap_or(false)
    });
    Ok(PredictionRegion::grid_set(
        grid.values().to_vec(),
        mask,
        grid.cell(),
        tester,
    ))
}

/// Weighted jackknife+. Draws K once, fits the K-dependent leave-one-out
/// models, and returns the interval between the weighted alpha-quantile of
/// the lower scores (with mass at -infinity) and the (1 - alpha)-quantile
/// of the upper scores (with mass at +infinity).
pub fn jackknife_plus(
    train: &TaggedDataset,
    test_x: &[f64],
    test_tag: f64,
    alg: &dyn TaggedAlgorithm,
    profile: &WeightProfile,
    alpha: f64,
    rng: &mut ChaCha8Rng,
) -> Result<PredictionRegion> {
    validate_full_inputs(train, test_x, profile, alpha)?;
    let k = draw_swap_index(profile, rng).k;
    jackknife_plus_with_k(train, test_x, test_tag, alg, profile, alpha, k)
}

/// `jackknife_plus` with the swap index fixed by the caller.
pub fn jackknife_plus_with_k(
    train: &TaggedDataset,
    test_x: &[f64],
    test_tag: f64,
    alg: &dyn TaggedAlgorithm,
    profile: &WeightProfile,
    alpha: f64,
    k: usize,
) -> Result<PredictionRegion> {
    validate_full_inputs(train, test_x, profile, alpha)?;
    let n = train.len();
    if k == 0 || k > n + 1 {
        return Err(Error::domain(format!("swap index {k} outside [1, {}]", n + 1)));
    }
    let mut lo_atoms = Vec::with_capacity(n);
    let mut hi_atoms = Vec::with_capacity(n);
    for i in 0..n {
        // Leave point i out; when K names another training point, that point
        // keeps its place but takes the test point's tag.
        let mut subset = TaggedDataset::new(train.dim());
        for j in 0..n {
            if j == i {
                continue;
            }
            let tag = if k <= n && j == k - 1 {
                test_tag
            } else {
                train.tag(j)
            };
            subset.push(train.x(j), train.y(j), tag)?;
        }
        // n = 1 leaves nothing to fit on; fall back to the zero predictor.
        let model = if subset.is_empty() {
            FittedModel::new(|_| 0.0)
        } else {
            alg.fit(&subset)?
        };
        let pred = model.predict(test_x);
        let loo = (train.y(i) - model.predict(train.x(i))).abs();
        lo_atoms.push(pred - loo);
        hi_atoms.push(pred + loo);
    }
    let masses = &profile.normalized()[..n];
    let lo_dist = DiscreteDistribution::from_weighted_values(
        &lo_atoms,
        masses,
        Some((ExtReal::NegInf, profile.test_weight())),
    )?;
    let hi_dist = DiscreteDistribution::from_weighted_values(
        &hi_atoms,
        masses,
        Some((ExtReal::PosInf, profile.test_weight())),
    )?;
    Ok(PredictionRegion::interval(
        lo_dist.quantile(alpha)?,
        hi_dist.quantile(1.0 - alpha)?,
    ))
}

/// Smallest j with j/(n+1) >= tau (up to the shared quantile slack); the
/// tau-quantile of n+1 equal-mass atoms is then the j-th smallest.
fn order_stat_index(tau: f64, n: usize) -> usize {
    let target = tau * (n + 1) as f64 - QUANTILE_EPS * (n + 1) as f64;
    (target.ceil() as usize).max(0)
}

/// Classic split conformal via order statistics: half-width is the
/// ceil((1-alpha)(n+1))-th smallest residual, +infinity past the sample.
pub fn classic_split_conformal(
    residuals: &[f64],
    point_prediction: f64,
    alpha: f64,
) -> Result<PredictionRegion> {
    check_alpha(alpha)?;
    if residuals.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::domain("residuals must be finite and nonnegative"));
    }
    let n = residuals.len();
    let j = order_stat_index(1.0 - alpha, n);
    if j > n {
        return Ok(PredictionRegion::interval(ExtReal::NegInf, ExtReal::PosInf));
    }
    let mut sorted = residuals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = sorted[j.max(1) - 1];
    Ok(PredictionRegion::interval(
        ExtReal::Finite(point_prediction - h),
        ExtReal::Finite(point_prediction + h),
    ))
}

/// Classic full conformal via order statistics: y is accepted iff its
/// residual is at most the ceil((1-alpha)(n+1))-th smallest of all n+1
/// residuals from the model fit on the augmented data (no swap, tags 1..n+1).
pub fn classic_full_conformal(
    train: &TaggedDataset,
    test_x: &[f64],
    alg: Arc<dyn TaggedAlgorithm>,
    alpha: f64,
    grid: &GridSpec,
) -> Result<PredictionRegion> {
    check_alpha(alpha)?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = train.len();
    let membership = move |train: &TaggedDataset, test_x: &[f64], y: f64| -> Result<bool> {
        let mut aug = train.clone();
        aug.push(test_x, y, (n + 1) as f64)?;
        let model = alg.fit(&aug)?;
        let mut rs: Vec<f64> = (0..n)
            .map(|i| (train.y(i) - model.predict(train.x(i))).abs())
            .collect();
        let r_test = (y - model.predict(test_x)).abs();
        rs.push(r_test);
        rs.sort_by(f64::total_cmp);
        let j = order_stat_index(1.0 - alpha, n);
        Ok(r_test <= rs[j.clamp(1, n + 1) - 1])
    };
    let mask: Vec<bool> = grid
        .values()
        .iter()
        .map(|&y| membership(train, test_x, y))
        .collect::<Result<_>>()?;
    let tester_train = train.clone();
    let tester_x = test_x.to_vec();
    let tester: Tester =
        Arc::new(move |y: f64| membership(&tester_train, &tester_x, y).unwrap_or(false));
    Ok(PredictionRegion::grid_set(
        grid.values().to_vec(),
        mask,
        grid.cell(),
        tester,
    ))
}

/// Classic jackknife+ via order statistics on the plain leave-one-out fits.
pub fn classic_jackknife_plus(
    train: &TaggedDataset,
    test_x: &[f64],
    alg: &dyn TaggedAlgorithm,
    alpha: f64,
) -> Result<PredictionRegion> {
    check_alpha(alpha)?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = train.len();
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for i in 0..n {
        let mut subset = TaggedDataset::new(train.dim());
        for j in 0..n {
            if j != i {
                subset.push(train.x(j), train.y(j), train.tag(j))?;
            }
        }
        let model = if subset.is_empty() {
            FittedModel::new(|_| 0.0)
        } else {
            alg.fit(&subset)?
        };
        let pred = model.predict(test_x);
        let loo = (train.y(i) - model.predict(train.x(i))).abs();
        lo.push(pred - loo);
        hi.push(pred + loo);
    }
    lo.sort_by(f64::total_cmp);
    hi.sort_by(f64::total_cmp);
    // The -infinity atom occupies the first slot of the lower multiset, so
    // the j-th smallest overall is the (j-1)-th smallest finite value.
    let jl = order_stat_index(alpha, n);
    let lower = if jl <= 1 {
        ExtReal::NegInf
    } else {
        ExtReal::Finite(lo[jl - 2])
    };
    let ju = order_stat_index(1.0 - alpha, n);
    let upper = if ju > n {
        ExtReal::PosInf
    } else {
        ExtReal::Finite(hi[ju.max(1) - 1])
    };
    Ok(PredictionRegion::interval(lower, upper))
}
