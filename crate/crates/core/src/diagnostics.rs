//! Exact small-instance oracles and bound calculators: total-variation and
//! mixture distances on finite supports, the swap-TV lemma check, strange-set
//! mass accounting, and the drift / changepoint / contamination coverage-gap
//! bounds.

use crate::error::{Error, Result};
use crate::weights::{DiscreteDistribution, WeightProfile};
use crate::ext_real::ExtReal;

/// Joint-support cap for exact enumeration.
pub const ENUMERATION_CAP: usize = 1_000_000;

/// A probability distribution on a finite set of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMarginal {
    support: Vec<f64>,
    masses: Vec<f64>,
}

impl FiniteMarginal {
    pub fn new(support: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != masses.len() {
            return Err(Error::dimension(
                "support and mass vectors must be nonempty and equal length",
            ));
        }
        if support.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("support values must be finite"));
        }
        let mut sorted = support.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::domain("support values must be distinct"));
        }
        let total: f64 = masses.iter().sum();
        if masses.iter().any(|m| *m < 0.0 || !m.is_finite()) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::domain("masses must be nonnegative and sum to 1"));
        }
        Ok(Self { support, masses })
    }

    pub fn point_mass(value: f64) -> Self {
        Self {
            support: vec![value],
            masses: vec![1.0],
        }
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(format!("Bernoulli parameter {p} outside [0, 1]")));
        }
        Self::new(vec![0.0, 1.0], vec![1.0 - p, p])
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn mass_at(&self, value: f64) -> f64 {
        self.support
            .iter()
            .position(|&v| v == value)
            .map(|i| self.masses[i])
            .unwrap_or(0.0)
    }
}

fn union_support(p: &FiniteMarginal, q: &FiniteMarginal) -> Vec<f64> {
    let mut values: Vec<f64> = p.support.iter().chain(q.support.iter()).copied().collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    values
}

/// Total variation distance on the union support: half the summed absolute
/// mass differences.
pub fn tv_discrete(p: &FiniteMarginal, q: &FiniteMarginal) -> f64 {
    0.5 * union_support(p, q)
        .iter()
        .map(|&v| (p.mass_at(v) - q.mass_at(v)).abs())
        .sum::<f64>()
}

/// Mixture distance: the smallest t such that p = (1-t) q + t (anything),
/// equal to max(0, 1 - min over the support of q of p(x)/q(x)).
pub fn dmix_discrete(p: &FiniteMarginal, q: &FiniteMarginal) -> f64 {
    let mut min_ratio = f64::INFINITY;
    for (i, &v) in q.support.iter().enumerate() {
        if q.masses[i] > 0.0 {
            min_ratio = min_ratio.min(p.mass_at(v) / q.masses[i]);
        }
    }
    (1.0 - min_ratio).clamp(0.0, 1.0)
}

/// Exact TV between a product-form joint and the same joint with coordinates
/// `i` (1-based) and n+1 swapped, by full enumeration, together with the
/// bound 2d - d^2 where d is the TV between the two swapped marginals.
/// Asserts exact_tv <= bound.
pub fn lemma1_check(marginals: &[FiniteMarginal], i: usize) -> Result<(f64, f64)> {
    let m = marginals.len();
    if m < 2 {
        return Err(Error::domain("need at least two coordinates"));
    }
    if i == 0 || i >= m {
        return Err(Error::domain(format!(
            "swap coordinate {i} outside [1, {}]",
            m - 1
        )));
    }
    let last = m - 1;
    let swapped_union = union_support(&marginals[i - 1], &marginals[last]);

    // Joint support size: the swapped coordinates range over the union
    // support, the rest over their own supports.
    let mut total: usize = 1;
    for (j, marg) in marginals.iter().enumerate() {
        let card = if j == i - 1 || j == last {
            swapped_union.len()
        } else {
            marg.support.len()
        };
        total = total
            .checked_mul(card)
            .ok_or(Error::SupportTooLarge {
                actual: usize::MAX,
                cap: ENUMERATION_CAP,
            })?;
        if total > ENUMERATION_CAP {
            return Err(Error::SupportTooLarge {
                actual: total,
                cap: ENUMERATION_CAP,
            });
        }
    }

    let supports: Vec<&[f64]> = (0..m)
        .map(|j| {
            if j == i - 1 || j == last {
                swapped_union.as_slice()
            } else {
                marginals[j].support.as_slice()
            }
        })
        .collect();

    let mut idx = vec![0usize; m];
    let mut sum = 0.0;
    loop {
        let mut p_orig = 1.0;
        let mut p_swap = 1.0;
        for j in 0..m {
            let v = supports[j][idx[j]];
            p_orig *= marginals[j].mass_at(v);
            // The swapped joint reads coordinate i's value at position n+1
            // and vice versa.
            let swapped_v = if j == i - 1 {
                supports[last][idx[last]]
            } else if j == last {
                supports[i - 1][idx[i - 1]]
            } else {
                v
            };
            p_swap *= marginals[j].mass_at(swapped_v);
        }
        sum += (p_orig - p_swap).abs();

        let mut j = 0;
        loop {
            if j == m {
                let exact_tv = 0.5 * sum;
                let d = tv_discrete(&marginals[i - 1], &marginals[last]);
                let bound = 2.0 * d - d * d;
                assert!(
                    exact_tv <= bound + 1e-9,
                    "swap TV {exact_tv} exceeds bound {bound}"
                );
                return Ok((exact_tv, bound));
            }
            idx[j] += 1;
            if idx[j] < supports[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// Indices (1-based) whose values exceed a weighted quantile or dominate
/// pairwise comparisons, with their total normalized weight.
#[derive(Debug, Clone, PartialEq)]
pub struct StrangenessSet {
    pub indices: Vec<usize>,
    pub weighted_mass: f64,
}

/// Strange points of a vector r of length n+1: entries strictly above the
/// (1 - alpha)-quantile of the weighted distribution of all n+1 entries.
/// The returned mass never exceeds alpha.
pub fn strangeness_full(r: &[f64], profile: &WeightProfile, alpha: f64) -> Result<StrangenessSet> {
    if r.len() != profile.n() + 1 {
        return Err(Error::dimension(format!(
            "{} values for a profile of length {}",
            r.len(),
            profile.n()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha {alpha} outside (0, 1)")));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("values must be finite"));
    }
    let w = profile.normalized();
    let dist = DiscreteDistribution::from_weighted_values(r, w, None)?;
    let q = dist.quantile(1.0 - alpha)?;
    let mut indices = Vec::new();
    let mut mass = 0.0;
    for (i, &v) in r.iter().enumerate() {
        if ExtReal::Finite(v) > q {
            indices.push(i + 1);
            mass += w[i];
        }
    }
    Ok(StrangenessSet {
        indices,
        weighted_mass: mass,
    })
}

/// Strange points of a comparison matrix r of side n+1: rows i whose
/// weighted count of strict wins r[i][j] > r[j][i] reaches 1 - alpha.
/// The returned mass never exceeds 2 alpha.
pub fn strangeness_jackknife(
    r: &[Vec<f64>],
    profile: &WeightProfile,
    alpha: f64,
) -> Result<StrangenessSet> {
    let m = r.len();
    if m != profile.n() + 1 || r.iter().any(|row| row.len() != m) {
        return Err(Error::dimension(format!(
            "matrix must be square of side {} to match the profile",
            profile.n() + 1
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha {alpha} outside (0, 1)")));
    }
    let w = profile.normalized();
    let mut indices = Vec::new();
    let mut mass = 0.0;
    for i in 0..m {
        let wins: f64 = (0..m).filter(|&j| r[i][j] > r[j][i]).map(|j| w[j]).sum();
        if wins >= 1.0 - alpha {
            indices.push(i + 1);
            mass += w[i];
        }
    }
    Ok(StrangenessSet {
        indices,
        weighted_mass: mass,
    })
}

/// Coverage-gap bound under bounded drift: the exact weighted sum
/// sum_i w~_i * 2 eps (n+1-i) with exponential weights, and the closed form
/// 2 eps / (1 - rho). Asserts exact <= closed form.
pub fn drift_gap_bound(epsilon: f64, rho: f64, n: usize) -> Result<(f64, f64)> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::domain(format!("rho {rho} outside (0, 1)")));
    }
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::domain(format!("epsilon {epsilon} must be >= 0")));
    }
    if n == 0 {
        return Err(Error::domain("horizon must be at least 1"));
    }
    let profile = WeightProfile::exponential(rho, n)?;
    let w = profile.normalized();
    let exact: f64 = (1..=n)
        .map(|i| w[i - 1] * 2.0 * epsilon * (n + 1 - i) as f64)
        .sum();
    let closed = 2.0 * epsilon / (1.0 - rho);
    assert!(exact <= closed + 1e-12 * closed.max(1.0));
    Ok((exact, closed))
}

/// Coverage-gap bound with a changepoint k steps ago: pre-change terms take
/// the worst-case TV of 1, giving sum_{i<=n-k} w~_i exactly, bounded by
/// rho^k. Asserts exact <= closed form.
pub fn changepoint_gap_bound(rho: f64, k: usize, n: usize) -> Result<(f64, f64)> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::domain(format!("rho {rho} outside (0, 1)")));
    }
    if k > n {
        return Err(Error::domain(format!("k = {k} exceeds horizon n = {n}")));
    }
    if n == 0 {
        return Err(Error::domain("horizon must be at least 1"));
    }
    let denom = 1.0 + (1..=n).map(|i| rho.powi((n + 1 - i) as i32)).sum::<f64>();
    let exact = (1..=n - k)
        .map(|i| rho.powi((n + 1 - i) as i32))
        .sum::<f64>()
        / denom;
    let closed = rho.powi(k as i32);
    assert!(exact <= closed + 1e-12);
    Ok((exact, closed))
}

/// Miscoverage bound under contamination: factor * alpha / (1 - sum of
/// weight-averaged mixture distances), with the vacuous bound 1 when the
/// denominator is nonpositive. Factor 1 applies to split/full conformal,
/// 2 to jackknife+.
pub fn huber_bound(
    alpha: f64,
    profile: &WeightProfile,
    dmix_values: &[f64],
    factor: u8,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha {alpha} outside (0, 1)")));
    }
    if !(factor == 1 || factor == 2) {
        return Err(Error::domain(format!("factor {factor} must be 1 or 2")));
    }
    if dmix_values.len() != profile.n() {
        return Err(Error::dimension(format!(
            "{} mixture distances for a profile of length {}",
            dmix_values.len(),
            profile.n()
        )));
    }
    if dmix_values.iter().any(|d| !(0.0..=1.0).contains(d)) {
        return Err(Error::domain("mixture distances must lie in [0, 1]"));
    }
    let total: f64 = profile.raw().iter().sum();
    if total <= 0.0 {
        return Err(Error::domain("weights must not all be zero"));
    }
    let contamination: f64 = profile
        .raw()
        .iter()
        .zip(dmix_values)
        .map(|(w, d)| w / total * d)
        .sum();
    let denom = 1.0 - contamination;
    if denom <= 0.0 {
        return Ok(1.0);
    }
    Ok((factor as f64 * alpha / denom).min(1.0))
}
