//! Simulation settings, the sequential prediction-evaluation loop, rolling
//! statistics, and the contamination (Huber) coverage experiment.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::conformal::{full_conformal_with_k, split_conformal, GridSpec};
use crate::diagnostics::huber_bound;
use crate::error::{Error, Result};
use crate::regression::{LeastSquares, TaggedAlgorithm, TaggedDataset, WeightedLeastSquares};
use crate::rng::{purpose, StreamFactory};
use crate::weights::{draw_swap_index, WeightProfile};

/// A simulated data distribution: 4 standard-normal covariates, unit noise,
/// and a per-setting coefficient schedule. Setting 1 is i.i.d.; Setting 2
/// has changepoints after steps 500 and 1500; Setting 3 drifts linearly
/// from the initial to the final coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationSetting {
    pub id: u8,
    pub horizon: usize,
}

pub const SETTING_DIM: usize = 4;

impl SimulationSetting {
    pub fn new(id: u8, horizon: usize) -> Result<Self> {
        if !(1..=3).contains(&id) {
            return Err(Error::domain(format!("setting {id} outside 1..=3")));
        }
        if horizon < 2 {
            return Err(Error::domain("horizon must be at least 2"));
        }
        Ok(Self { id, horizon })
    }

    /// Coefficient vector in force at time i (1-based).
    pub fn beta_at(&self, i: usize) -> [f64; SETTING_DIM] {
        match self.id {
            1 => [2.0, 1.0, 0.0, 0.0],
            2 => {
                if i <= 500 {
                    [2.0, 1.0, 0.0, 0.0]
                } else if i <= 1500 {
                    [0.0, -2.0, -1.0, 0.0]
                } else {
                    [0.0, 0.0, 2.0, 1.0]
                }
            }
            _ => {
                let start = [2.0, 1.0, 0.0, 0.0];
                let end = [0.0, 0.0, 2.0, 1.0];
                let t = (i - 1) as f64 / (self.horizon - 1) as f64;
                [
                    start[0] + t * (end[0] - start[0]),
                    start[1] + t * (end[1] - start[1]),
                    start[2] + t * (end[2] - start[2]),
                    start[3] + t * (end[3] - start[3]),
                ]
            }
        }
    }
}

/// Draws the full length-N series for a setting; tags are the time indices
/// (the sequential loop re-tags as needed).
pub fn generate_setting(setting: &SimulationSetting, rng: &mut ChaCha8Rng) -> TaggedDataset {
    let mut data = TaggedDataset::new(SETTING_DIM);
    for i in 1..=setting.horizon {
        let x: Vec<f64> = (0..SETTING_DIM)
            .map(|_| StandardNormal.sample(rng))
            .collect();
        let beta = setting.beta_at(i);
        let noise: f64 = StandardNormal.sample(rng);
        let y: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + noise;
        data.push(&x, y, i as f64).expect("fixed dimension");
    }
    data
}

/// The three benchmark methods: classic full conformal with least squares,
/// and the weighted variants with least squares / weighted least squares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    CpLs,
    NexCpLs,
    NexCpWls,
}

pub const ALL_METHODS: [Method; 3] = [Method::CpLs, Method::NexCpLs, Method::NexCpWls];

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::CpLs => "CP+LS",
            Method::NexCpLs => "nex-CP+LS",
            Method::NexCpWls => "nex-CP+WLS",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "CP+LS" | "cp+ls" | "cp-ls" => Ok(Method::CpLs),
            "nex-CP+LS" | "nex-cp+ls" | "nex-cp-ls" => Ok(Method::NexCpLs),
            "nex-CP+WLS" | "nex-cp+wls" | "nex-cp-wls" => Ok(Method::NexCpWls),
            other => Err(Error::domain(format!("unknown method {other:?}"))),
        }
    }
}

/// Configuration of one sequential pass over a series.
#[derive(Debug, Clone)]
pub struct SequentialConfig {
    pub alpha: f64,
    pub rho: f64,
    pub burn_in: usize,
    pub grid_points: usize,
    pub methods: Vec<Method>,
    pub fast_path: bool,
}

impl Default for SequentialConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            rho: 0.99,
            burn_in: 100,
            grid_points: 1000,
            methods: ALL_METHODS.to_vec(),
            fast_path: true,
        }
    }
}

/// One prediction outcome: time is the index (1-based) of the predicted
/// point.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub time: usize,
    pub method: Method,
    pub covered: bool,
    pub width: f64,
}

/// All step records of one sequential pass, in (time, method-list) order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    pub records: Vec<StepRecord>,
}

impl ExperimentReport {
    pub fn mean_coverage(&self, method: Method) -> f64 {
        let (sum, count) = self
            .records
            .iter()
            .filter(|r| r.method == method)
            .fold((0.0, 0usize), |(s, c), r| {
                (s + if r.covered { 1.0 } else { 0.0 }, c + 1)
            });
        sum / count as f64
    }

    pub fn mean_width(&self, method: Method) -> f64 {
        let (sum, count) = self
            .records
            .iter()
            .filter(|r| r.method == method)
            .fold((0.0, 0usize), |(s, c), r| (s + r.width, c + 1));
        sum / count as f64
    }
}

/// Runs every configured method through the series: at each step n from
/// burn_in to N-1, train on points 1..n with weights and tags rho^(n+1-i)
/// recomputed for that step, predict point n+1, and record exact coverage
/// and grid width. Each weighted method draws a fresh swap index per step
/// from its own substream, so adding a method never perturbs another.
pub fn run_sequential(
    data: &TaggedDataset,
    config: &SequentialConfig,
    factory: &StreamFactory,
    trial: u64,
) -> Result<ExperimentReport> {
    let n_total = data.len();
    if config.burn_in >= n_total {
        return Err(Error::domain(format!(
            "burn-in {} must be below the horizon {n_total}",
            config.burn_in
        )));
    }
    if !(config.rho > 0.0 && config.rho <= 1.0) {
        return Err(Error::domain(format!("rho {} outside (0, 1]", config.rho)));
    }
    if config.methods.is_empty() {
        return Err(Error::domain("no methods configured"));
    }
    let ls: Arc<dyn TaggedAlgorithm> = Arc::new(LeastSquares);
    let wls: Arc<dyn TaggedAlgorithm> = Arc::new(WeightedLeastSquares);

    let mut train = TaggedDataset::new(data.dim());
    let mut records = Vec::with_capacity((n_total - config.burn_in) * config.methods.len());
    for i in 0..config.burn_in {
        train.push(data.x(i), data.y(i), 1.0)?;
    }
    for n in config.burn_in..n_total {
        // Tags for this step: rho^(n+1-i), matching the method weights; the
        // symmetric algorithms ignore them.
        for i in 1..=n {
            train.set_tag(i - 1, config.rho.powi((n + 1 - i) as i32));
        }
        let profile = WeightProfile::exponential(config.rho, n)?;
        let unit = WeightProfile::unit(n);
        let grid = GridSpec::default_for(train.ys(), config.grid_points)?;
        let test_x = data.x(n);
        let test_y = data.y(n);

        for (m_idx, method) in config.methods.iter().enumerate() {
            let (alg, prof, k) = match method {
                // Classic full conformal: unit weights, symmetric fit, no
                // swap needed (any swap index gives the same region).
                Method::CpLs => (ls.clone(), &unit, n + 1),
                Method::NexCpLs | Method::NexCpWls => {
                    let mut swap_rng =
                        factory.stream(&[purpose::SWAP, trial, n as u64, m_idx as u64]);
                    let k = draw_swap_index(&profile, &mut swap_rng).k;
                    let alg = if *method == Method::NexCpLs {
                        ls.clone()
                    } else {
                        wls.clone()
                    };
                    (alg, &profile, k)
                }
            };
            let region = full_conformal_with_k(
                &train,
                test_x,
                1.0,
                alg,
                prof,
                config.alpha,
                &grid,
                k,
                config.fast_path,
            )?;
            records.push(StepRecord {
                time: n + 1,
                method: *method,
                covered: region.contains(test_y),
                width: region.width(),
            });
        }
        train.push(data.x(n), data.y(n), 1.0)?;
    }
    Ok(ExperimentReport { records })
}

/// A full multi-trial simulation: generates each trial's series from its own
/// data substream and runs the sequential loop. Trials execute in parallel;
/// results are returned in trial order regardless of thread count.
pub fn run_simulation(
    setting: &SimulationSetting,
    trials: usize,
    config: &SequentialConfig,
    factory: &StreamFactory,
) -> Result<Vec<ExperimentReport>> {
    if trials == 0 {
        return Err(Error::domain("need at least one trial"));
    }
    (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut data_rng = factory.stream(&[purpose::DATA, trial]);
            let data = generate_setting(setting, &mut data_rng);
            run_sequential(&data, config, factory, trial)
        })
        .collect()
}

/// Per-method aggregate over a set of reports.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub mean_coverage: f64,
    pub mean_width: f64,
}

pub fn summarize(reports: &[ExperimentReport], methods: &[Method]) -> Vec<MethodSummary> {
    methods
        .iter()
        .map(|&method| {
            let mut cov = 0.0;
            let mut wid = 0.0;
            let mut count = 0usize;
            for report in reports {
                for r in report.records.iter().filter(|r| r.method == method) {
                    cov += if r.covered { 1.0 } else { 0.0 };
                    wid += r.width;
                    count += 1;
                }
            }
            MethodSummary {
                method,
                mean_coverage: cov / count as f64,
                mean_width: wid / count as f64,
            }
        })
        .collect()
}

/// Trailing rolling mean: output[j] is the mean of series[j..j+window].
pub fn rolling_mean(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window > series.len() {
        return Err(Error::domain(format!(
            "window {window} outside [1, {}]",
            series.len()
        )));
    }
    let mut out = Vec::with_capacity(series.len() - window + 1);
    let mut sum: f64 = series[..window].iter().sum();
    out.push(sum / window as f64);
    for j in window..series.len() {
        sum += series[j] - series[j - window];
        out.push(sum / window as f64);
    }
    Ok(out)
}

/// Contamination experiment: each training response is drawn from the
/// mixture (1 - epsilon) target + epsilon contamination, the test response
/// from the target alone; weighted split conformal around the zero predictor
/// is scored over many trials. Returns (empirical miscoverage, theoretical
/// bound) and asserts the bound holds up to 3 binomial standard errors.
#[allow(clippy::too_many_arguments)]
pub fn run_huber_experiment(
    target: &(dyn Fn(&mut ChaCha8Rng) -> f64 + Sync),
    contamination: &(dyn Fn(&mut ChaCha8Rng) -> f64 + Sync),
    epsilon: f64,
    n: usize,
    alpha: f64,
    profile: &WeightProfile,
    trials: usize,
    factory: &StreamFactory,
) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::domain(format!("epsilon {epsilon} outside [0, 1)")));
    }
    if n == 0 || trials == 0 || profile.n() != n {
        return Err(Error::domain("need n >= 1, trials >= 1, and a matching profile"));
    }
    let misses: usize = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = factory.stream(&[purpose::HUBER, trial]);
            let residuals: Vec<f64> = (0..n)
                .map(|_| {
                    let y = if rng.gen::<f64>() < epsilon {
                        contamination(&mut rng)
                    } else {
                        target(&mut rng)
                    };
                    y.abs()
                })
                .collect();
            let test_y = target(&mut rng);
            let region = split_conformal(&residuals, 0.0, profile, alpha)
                .expect("validated inputs");
            usize::from(!region.contains(test_y))
        })
        .sum();
    let empirical = misses as f64 / trials as f64;
    let bound = huber_bound(alpha, profile, &vec![epsilon; n], 1)?;
    let se = (empirical * (1.0 - empirical) / trials as f64).sqrt();
    assert!(
        empirical <= bound + 3.0 * se.max(1e-6),
        "miscoverage {empirical} exceeds bound {bound}"
    );
    Ok((empirical, bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regression::FittedModel;

    #[test]
    fn setting_schedules() {
        let s2 = SimulationSetting::new(2, 2000).unwrap();
        assert_eq!(s2.beta_at(500), [2.0, 1.0, 0.0, 0.0]);
        assert_eq!(s2.beta_at(501), [0.0, -2.0, -1.0, 0.0]);
        assert_eq!(s2.beta_at(1500), [0.0, -2.0, -1.0, 0.0]);
        assert_eq!(s2.beta_at(1501), [0.0, 0.0, 2.0, 1.0]);
        let s3 = SimulationSetting::new(3, 2001).unwrap();
        assert_eq!(s3.beta_at(1), [2.0, 1.0, 0.0, 0.0]);
        assert_eq!(s3.beta_at(2001), [0.0, 0.0, 2.0, 1.0]);
        // Midpoint of a linear interpolation.
        assert_eq!(s3.beta_at(1001), [1.0, 0.5, 1.0, 0.5]);
        assert!(SimulationSetting::new(4, 100).is_err());
    }

    #[test]
    fn generated_series_is_deterministic_per_stream() {
        let setting = SimulationSetting::new(1, 50).unwrap();
        let factory = StreamFactory::new(3);
        let a = generate_setting(&setting, &mut factory.stream(&[purpose::DATA, 0]));
        let b = generate_setting(&setting, &mut factory.stream(&[purpose::DATA, 0]));
        let c = generate_setting(&setting, &mut factory.stream(&[purpose::DATA, 1]));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rolling_mean_cases() {
        assert_eq!(rolling_mean(&[2.0; 7], 3).unwrap(), vec![2.0; 5]);
        assert_eq!(
            rolling_mean(&[0.0, 1.0, 0.0, 1.0], 2).unwrap(),
            vec![0.5, 0.5, 0.5]
        );
        assert!(rolling_mean(&[1.0], 2).is_err());
        assert!(rolling_mean(&[1.0], 0).is_err());
    }

    #[test]
    fn rolling_mean_matches_naive_oracle() {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let series: Vec<f64> = (0..200).map(|_| rng.gen::<f64>()).collect();
        for window in [1, 2, 7, 50, 200] {
            let fast = rolling_mean(&series, window).unwrap();
            let naive: Vec<f64> = (0..=series.len() - window)
                .map(|j| series[j..j + window].iter().sum::<f64>() / window as f64)
                .collect();
            assert_eq!(fast.len(), naive.len());
            for (a, b) in fast.iter().zip(&naive) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    /// Interpolating algorithm used for the degenerate noiseless check.
    struct ExactLine;

    impl TaggedAlgorithm for ExactLine {
        fn fit(&self, _data: &TaggedDataset) -> Result<FittedModel> {
            Ok(FittedModel::new(|x: &[f64]| 3.0 * x[0]))
        }

        fn is_symmetric(&self) -> bool {
            true
        }

        fn linear_in_y(&self) -> bool {
            true
        }
    }

    #[test]
    fn noiseless_exact_fit_gives_full_coverage_and_tiny_width() {
        // y = 3x exactly; a model that always predicts 3x leaves every
        // residual at zero, so the accepted set collapses to (nearly) a
        // point and coverage is perfect.
        let mut data = TaggedDataset::new(1);
        for i in 1..=40 {
            let x = (i as f64 * 0.618).fract() * 2.0 - 1.0;
            data.push(&[x], 3.0 * x, i as f64).unwrap();
        }
        let factory = StreamFactory::new(9);
        let config = SequentialConfig {
            burn_in: 10,
            grid_points: 101,
            methods: vec![Method::NexCpLs],
            ..SequentialConfig::default()
        };
        // Substitute the exact-fit algorithm by running the loop manually.
        let mut covered_all = true;
        let mut max_width: f64 = 0.0;
        for n in config.burn_in..data.len() {
            let mut train = TaggedDataset::new(1);
            for i in 0..n {
                train.push(data.x(i), data.y(i), 1.0).unwrap();
            }
            let profile = WeightProfile::exponential(config.rho, n).unwrap();
            let grid = GridSpec::default_for(train.ys(), config.grid_points).unwrap();
            let mut rng = factory.stream(&[purpose::SWAP, 0, n as u64]);
            let k = draw_swap_index(&profile, &mut rng).k;
            let region = full_conformal_with_k(
                &train,
                data.x(n),
                1.0,
                Arc::new(ExactLine),
                &profile,
                config.alpha,
                &grid,
                k,
                true,
            )
            .unwrap();
            covered_all &= region.contains(data.y(n));
            max_width = max_width.max(region.width());
        }
        assert!(covered_all);
        assert!(max_width <= grid_cell_bound(&data, 101));
    }

    fn grid_cell_bound(data: &TaggedDataset, points: usize) -> f64 {
        let lo = data.ys().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = data.ys().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        2.0 * (hi - lo) / (points - 1) as f64
    }

    #[test]
    fn unit_rho_collapses_nex_onto_classic() {
        let setting = SimulationSetting::new(1, 140).unwrap();
        let factory = StreamFactory::new(11);
        let mut data_rng = factory.stream(&[purpose::DATA, 0]);
        let data = generate_setting(&setting, &mut data_rng);
        let config = SequentialConfig {
            rho: 1.0,
            burn_in: 100,
            grid_points: 201,
            methods: vec![Method::CpLs, Method::NexCpLs],
            ..SequentialConfig::default()
        };
        let report = run_sequential(&data, &config, &factory, 0).unwrap();
        for pair in report.records.chunks(2) {
            assert_eq!(pair[0].time, pair[1].time);
            assert_eq!(pair[0].covered, pair[1].covered);
            assert!((pair[0].width - pair[1].width).abs() < 1e-12);
        }
    }

    #[test]
    fn simulation_is_deterministic_across_thread_counts() {
        let setting = SimulationSetting::new(1, 130).unwrap();
        let config = SequentialConfig {
            burn_in: 100,
            grid_points: 101,
            ..SequentialConfig::default()
        };
        let factory = StreamFactory::new(5);
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_simulation(&setting, 4, &config, &factory))
            .unwrap();
        let parallel = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap()
            .install(|| run_simulation(&setting, 4, &config, &factory))
            .unwrap();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn huber_bound_matches_reported_value() {
        use rand_distr::StandardNormal;
        let factory = StreamFactory::new(17);
        let n = 50;
        let profile = WeightProfile::exponential(0.99, n).unwrap();
        let target = |rng: &mut ChaCha8Rng| -> f64 {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
        };
        let shifted = |rng: &mut ChaCha8Rng| -> f64 {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng) + 100.0
        };
        let (_, bound) =
            run_huber_experiment(&target, &shifted, 0.1, n, 0.05, &profile, 500, &factory)
                .unwrap();
        assert!((bound - 0.05 / 0.9).abs() < 1e-12);
        // epsilon = 0: plain exchangeable split conformal.
        let (empirical, bound) =
            run_huber_experiment(&target, &shifted, 0.0, n, 0.05, &profile, 2000, &factory)
                .unwrap();
        assert!((bound - 0.05).abs() < 1e-12);
        let se = (0.05f64 * 0.95 / 2000.0).sqrt();
        assert!((empirical - 0.05).abs() <= 3.0 * se + 0.05 / (n as f64 + 1.0));
    }
}
