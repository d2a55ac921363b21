//! Weight normalization, weighted quantiles on the extended reals, and the
//! random swap-index draw. These are the primitives every prediction method
//! builds on.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::ext_real::ExtReal;

/// Absolute tolerance for mass normalization checks.
pub const MASS_TOL: f64 = 1e-12;

/// Slack applied when comparing a cumulative mass against the quantile level,
/// so that mathematically exact CDF ties (e.g. equal masses 1/(n+1)) resolve
/// to the left-continuous answer despite floating-point summation error.
pub const QUANTILE_EPS: f64 = 1e-12;

/// Raw weights w_1..w_n in [0,1] together with the normalized weights
/// (w~_1, ..., w~_n, w~_{n+1}), where w~_i = w_i / (w_1 + ... + w_n + 1) and
/// the (n+1)-st entry is the test point's weight 1 / (w_1 + ... + w_n + 1).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightProfile {
    raw: Vec<f64>,
    normalized: Vec<f64>,
}

impl WeightProfile {
    /// Normalizes raw weights. Every entry must lie in [0,1]; the sequence may
    /// be empty (n = 0), in which case the test point carries all the mass.
    pub fn new(raw: &[f64]) -> Result<Self> {
        for (i, &w) in raw.iter().enumerate() {
            if !w.is_finite() || !(0.0..=1.0).contains(&w) {
                return Err(Error::domain(format!(
                    "raw weight w[{}] = {} outside [0, 1]",
                    i + 1,
                    w
                )));
            }
        }
        let denom: f64 = raw.iter().sum::<f64>() + 1.0;
        let mut normalized: Vec<f64> = raw.iter().map(|&w| w / denom).collect();
        normalized.push(1.0 / denom);
        Ok(Self {
            raw: raw.to_vec(),
            normalized,
        })
    }

    /// Unit weights w_i = 1, which recover the classic unweighted methods.
    pub fn unit(n: usize) -> Self {
        Self::new(&vec![1.0; n]).expect("unit weights are valid")
    }

    /// Exponentially decaying weights w_i = rho^(n+1-i), the usual choice
    /// for drifting data.
    pub fn exponential(rho: f64, n: usize) -> Result<Self> {
        if !(0.0 < rho && rho <= 1.0) {
            return Err(Error::domain(format!("rho = {rho} outside (0, 1]")));
        }
        let raw: Vec<f64> = (1..=n).map(|i| rho.powi((n + 1 - i) as i32)).collect();
        Self::new(&raw)
    }

    pub fn n(&self) -> usize {
        self.raw.len()
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    /// Normalized weights, length n+1; the last entry is the test weight.
    pub fn normalized(&self) -> &[f64] {
        &self.normalized
    }

    /// The test point's normalized weight w~_{n+1} (the "effective sample
    /// size" is its reciprocal).
    pub fn test_weight(&self) -> f64 {
        *self.normalized.last().expect("normalized is nonempty")
    }
}

/// See [`WeightProfile::new`].
pub fn normalize_weights(raw: &[f64]) -> Result<WeightProfile> {
    WeightProfile::new(raw)
}

/// A finite mixture of point masses on the extended reals.
#[derive(Debug, Clone)]
pub struct DiscreteDistribution {
    atoms: Vec<(ExtReal, f64)>,
}

impl DiscreteDistribution {
    /// Validates masses: nonnegative, summing to 1 within [`MASS_TOL`]
    /// (renormalized once if inside the tolerance, rejected otherwise).
    /// Duplicate values are permitted; quantile semantics act on the merged
    /// CDF.
    pub fn new(atoms: Vec<(ExtReal, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::domain("distribution must have at least one atom"));
        }
        let mut total = 0.0;
        for &(_, mass) in &atoms {
            if !mass.is_finite() || mass < 0.0 {
                return Err(Error::domain(format!("atom mass {mass} is negative")));
            }
            total += mass;
        }
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::domain(format!(
                "atom masses sum to {total}, outside tolerance {MASS_TOL} of 1"
            )));
        }
        let atoms = if total == 1.0 {
            atoms
        } else {
            atoms.into_iter().map(|(v, m)| (v, m / total)).collect()
        };
        Ok(Self { atoms })
    }

    /// Convenience constructor from finite values and masses, plus an optional
    /// extra atom (typically a point mass at an infinity).
    pub fn from_weighted_values(
        values: &[f64],
        masses: &[f64],
        extra: Option<(ExtReal, f64)>,
    ) -> Result<Self> {
        if values.len() != masses.len() {
            return Err(Error::dimension(format!(
                "{} values vs {} masses",
                values.len(),
                masses.len()
            )));
        }
        let mut atoms: Vec<(ExtReal, f64)> = values
            .iter()
            .zip(masses)
            .map(|(&v, &m)| (ExtReal::from_f64(v), m))
            .collect();
        if let Some(a) = extra {
            atoms.push(a);
        }
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &[(ExtReal, f64)] {
        &self.atoms
    }

    /// The left-continuous generalized inverse inf{v : F(v) >= tau}, where F
    /// is the CDF of the merged atoms ordered on the extended reals. For
    /// tau = 0 returns the smallest atom value.
    pub fn quantile(&self, tau: f64) -> Result<ExtReal> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::domain(format!("tau = {tau} outside [0, 1]")));
        }
        let mut sorted = self.atoms.clone();
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        if tau == 0.0 {
            return Ok(sorted[0].0);
        }
        let mut cum = 0.0;
        for &(value, mass) in &sorted {
            cum += mass;
            if cum >= tau - QUANTILE_EPS {
                return Ok(value);
            }
        }
        // Mass deficits below tolerance land here; the largest atom is the inf.
        Ok(sorted.last().expect("nonempty").0)
    }
}

/// See [`DiscreteDistribution::quantile`].
pub fn weighted_quantile(dist: &DiscreteDistribution, tau: f64) -> Result<ExtReal> {
    dist.quantile(tau)
}

/// The random swap index K in [1, n+1], drawn multinomially from the
/// normalized weights, together with the uniform variate that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapDraw {
    /// 1-based index; K = n+1 means "no swap".
    pub k: usize,
    /// The uniform variate consumed from the stream (replay provenance).
    pub uniform: f64,
}

impl SwapDraw {
    pub fn is_identity(&self, n: usize) -> bool {
        self.k == n + 1
    }
}

/// Draws K ~ sum_i w~_i * delta_i. Consumes exactly one `u64` from the
/// stream per call, so replays are position-independent.
pub fn draw_swap_index(profile: &WeightProfile, rng: &mut impl RngCore) -> SwapDraw {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    let weights = profile.normalized();
    let mut cum = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        cum += w;
        if u < cum {
            return SwapDraw { k: i + 1, uniform: u };
        }
    }
    // Rounding residue: the total may fall a few ulps short of 1.
    SwapDraw {
        k: weights.len(),
        uniform: u,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamFactory;

    fn fin(v: f64) -> ExtReal {
        ExtReal::finite(v)
    }

    #[test]
    fn normalize_equal_weights() {
        let p = WeightProfile::new(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(p.normalized(), &[0.25, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn normalize_all_zero() {
        let p = WeightProfile::new(&[0.0, 0.0]).unwrap();
        assert_eq!(p.normalized(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn normalize_exponential_pair() {
        // rho = 0.99, n = 2: w = (0.9801, 0.99), denominator 2.9701.
        let p = WeightProfile::exponential(0.99, 2).unwrap();
        let d = 0.9801 + 0.99 + 1.0;
        let got = p.normalized();
        assert!((got[0] - 0.9801 / d).abs() < 1e-15);
        assert!((got[1] - 0.99 / d).abs() < 1e-15);
        assert!((got[2] - 1.0 / d).abs() < 1e-15);
    }

    #[test]
    fn normalize_rejects_out_of_range() {
        assert!(WeightProfile::new(&[1.2]).is_err());
        assert!(WeightProfile::new(&[-0.1]).is_err());
        assert!(WeightProfile::new(&[f64::NAN]).is_err());
    }

    #[test]
    fn normalized_sums_to_one_and_test_weight_dominates() {
        let p = WeightProfile::new(&[0.3, 0.9, 0.05]).unwrap();
        let sum: f64 = p.normalized().iter().sum();
        assert!((sum - 1.0).abs() < MASS_TOL);
        let tw = p.test_weight();
        for &w in &p.normalized()[..p.n()] {
            assert!(tw >= w);
        }
    }

    #[test]
    fn empty_profile_puts_all_mass_on_test_point() {
        let p = WeightProfile::new(&[]).unwrap();
        assert_eq!(p.normalized(), &[1.0]);
    }

    #[test]
    fn quantile_hits_cdf_exactly() {
        let d = DiscreteDistribution::new(vec![
            (fin(1.0), 1.0 / 3.0),
            (fin(2.0), 1.0 / 3.0),
            (fin(3.0), 1.0 / 3.0),
        ])
        .unwrap();
        assert_eq!(d.quantile(2.0 / 3.0).unwrap(), fin(2.0));
    }

    #[test]
    fn quantile_order_statistic_form() {
        // Equal masses 1/10 on 1..9 plus +inf; tau = 0.9 selects the 9th value.
        let mut atoms: Vec<(ExtReal, f64)> = (1..=9).map(|r| (fin(r as f64), 0.1)).collect();
        atoms.push((ExtReal::PosInf, 0.1));
        let d = DiscreteDistribution::new(atoms).unwrap();
        assert_eq!(d.quantile(0.9).unwrap(), fin(9.0));
        assert_eq!(d.quantile(0.95).unwrap(), ExtReal::PosInf);
    }

    #[test]
    fn quantile_tau_zero_is_smallest_atom() {
        let d = DiscreteDistribution::new(vec![(fin(5.0), 0.5), (fin(-2.0), 0.5)]).unwrap();
        assert_eq!(d.quantile(0.0).unwrap(), fin(-2.0));
    }

    #[test]
    fn quantile_rejects_bad_tau() {
        let d = DiscreteDistribution::new(vec![(fin(0.0), 1.0)]).unwrap();
        assert!(d.quantile(-0.1).is_err());
        assert!(d.quantile(1.5).is_err());
    }

    #[test]
    fn masses_out_of_tolerance_rejected() {
        assert!(DiscreteDistribution::new(vec![(fin(0.0), 0.9)]).is_err());
        assert!(DiscreteDistribution::new(vec![(fin(0.0), -0.1), (fin(1.0), 1.1)]).is_err());
    }

    #[test]
    fn swap_draw_all_zero_weights() {
        let p = WeightProfile::new(&[0.0, 0.0, 0.0]).unwrap();
        let f = StreamFactory::new(42);
        for step in 0..100 {
            let mut rng = f.stream(&[step]);
            assert_eq!(draw_swap_index(&p, &mut rng).k, 4);
        }
    }

    #[test]
    fn swap_draw_single_point_symmetry() {
        let p = WeightProfile::new(&[1.0]).unwrap();
        let f = StreamFactory::new(9);
        let mut ones = 0usize;
        let trials = 100_000;
        for step in 0..trials {
            let mut rng = f.stream(&[step as u64]);
            if draw_swap_index(&p, &mut rng).k == 1 {
                ones += 1;
            }
        }
        let freq = ones as f64 / trials as f64;
        // 3 binomial standard errors around 1/2.
        let se = (0.25f64 / trials as f64).sqrt();
        assert!((freq - 0.5).abs() < 3.0 * se, "freq = {freq}");
    }

    #[test]
    fn swap_draw_multinomial_frequencies() {
        let p = WeightProfile::new(&[0.25, 0.5, 1.0]).unwrap();
        let f = StreamFactory::new(1234);
        let trials = 100_000usize;
        let mut counts = [0usize; 4];
        for step in 0..trials {
            let mut rng = f.stream(&[step as u64]);
            counts[draw_swap_index(&p, &mut rng).k - 1] += 1;
        }
        for (i, &w) in p.normalized().iter().enumerate() {
            let freq = counts[i] as f64 / trials as f64;
            let se = (w * (1.0 - w) / trials as f64).sqrt();
            assert!(
                (freq - w).abs() <= 3.0 * se,
                "index {i}: freq {freq} vs weight {w}"
            );
        }
    }

    #[test]
    fn swap_draw_consumes_one_value() {
        use rand::RngCore;
        let p = WeightProfile::new(&[0.5, 0.5]).unwrap();
        let f = StreamFactory::new(5);
        let mut a = f.stream(&[1]);
        let mut b = f.stream(&[1]);
        draw_swap_index(&p, &mut a);
        b.next_u64();
        assert_eq!(a.next_u64(), b.next_u64());
    }
}
