use crate::output::{fmt_f64, write_results, write_rolling, write_summary};
use crate::{BoundsArgs, BoundsCommand, DiagnoseArgs, Elec2Args, SimulateArgs};
use nexcp_core::diagnostics::{
    FiniteMarginal, dmix_discrete, huber_bound, lemma1_check, strangeness_full,
    strangeness_jackknife, tv_discrete,
};
use nexcp_core::experiments::{
    ALL_METHODS, ExperimentReport, SequentialConfig, SimulationSetting, run_sequential,
    run_simulation, summarize,
};
use nexcp_core::ingest::{Elec2Config, load_elec2, permute_dataset};
use nexcp_core::rng::purpose;
use nexcp_core::{StreamFactory, WeightProfile};
use rand::Rng;
use std::path::PathBuf;
use std::process::ExitCode;

pub const DATA_DIR_ENV: &str = "NEXCP_DATA_DIR";

/// Prints the message and returns the usage exit code without touching the
/// filesystem.
macro_rules! usage {
    ($($arg:tt)*) => {{
        eprintln!("error: {}", format!($($arg)*));
        return Ok(ExitCode::from(2));
    }};
}

fn check_common(alpha: f64, rho: f64, burn_in: usize, grid_points: usize) -> Option<String> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Some(format!("--alpha {alpha} must lie in (0, 1)"));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Some(format!("--rho {rho} must lie in (0, 1]"));
    }
    if burn_in == 0 {
        return Some("--burn-in must be at least 1".into());
    }
    if grid_points < 2 {
        return Some("--grid-points must be at least 2".into());
    }
    None
}

pub fn simulate(args: SimulateArgs) -> anyhow::Result<ExitCode> {
    if let Some(msg) = check_common(args.alpha, args.rho, args.burn_in, args.grid_points) {
        usage!("{msg}");
    }
    if !(1..=3).contains(&args.setting) {
        usage!("--setting {} must be 1, 2, or 3", args.setting);
    }
    if args.trials == 0 {
        usage!("--trials must be at least 1");
    }
    if args.horizon <= args.burn_in {
        usage!(
            "--horizon {} must exceed --burn-in {}",
            args.horizon,
            args.burn_in
        );
    }
    if args.window == 0 {
        usage!("--window must be at least 1");
    }
    let setting = SimulationSetting::new(args.setting, args.horizon)?;
    let config = SequentialConfig {
        alpha: args.alpha,
        rho: args.rho,
        burn_in: args.burn_in,
        grid_points: args.grid_points,
        methods: ALL_METHODS.to_vec(),
        fast_path: !args.no_fast_path,
    };
    let factory = StreamFactory::new(args.seed);
    let reports = run_simulation(&setting, args.trials, &config, &factory)?;
    emit(&args.out, &reports, &config, args.window)?;
    Ok(ExitCode::SUCCESS)
}

fn resolve_elec2_path(data: Option<PathBuf>) -> anyhow::Result<PathBuf> {
    if let Some(path) = data {
        return Ok(path);
    }
    let dir = std::env::var_os(DATA_DIR_ENV).ok_or_else(|| {
        anyhow::anyhow!("no --data path given and {DATA_DIR_ENV} is not set")
    })?;
    let dir = PathBuf::from(dir);
    for name in ["elec2.csv", "electricity-normalized.csv", "elecNormNew.csv"] {
        let candidate = dir.join(name);
        if candidate.is_file() {
            return Ok(candidate);
        }
    }
    anyhow::bail!("no ELEC2 csv found under {}", dir.display())
}

pub fn elec2(args: Elec2Args) -> anyhow::Result<ExitCode> {
    if let Some(msg) = check_common(args.alpha, args.rho, args.burn_in, args.grid_points) {
        usage!("{msg}");
    }
    if args.window == 0 {
        usage!("--window must be at least 1");
    }
    if let Some(slots) = &args.slots {
        if slots.iter().any(|&s| s == 0 || s > 48) {
            usage!("--slots entries must lie in 1..=48");
        }
    }
    let path = resolve_elec2_path(args.data)?;
    let mut config = Elec2Config::default();
    if let Some(slots) = args.slots {
        config.slots = slots;
    }
    config.drop_constant_prefix = !args.keep_prefix;
    let load = load_elec2(&path, &config)?;
    for warning in &load.warnings {
        eprintln!("warning: {warning}");
    }
    let factory = StreamFactory::new(args.seed);
    let data = if args.permute {
        let mut rng = factory.stream(&[purpose::PERMUTE, 0]);
        permute_dataset(&load.data, &mut rng)?
    } else {
        load.data
    };
    if data.len() <= args.burn_in {
        usage!(
            "--burn-in {} must be below the series length {}",
            args.burn_in,
            data.len()
        );
    }
    let run_config = SequentialConfig {
        alpha: args.alpha,
        rho: args.rho,
        burn_in: args.burn_in,
        grid_points: args.grid_points,
        methods: ALL_METHODS.to_vec(),
        fast_path: !args.no_fast_path,
    };
    let report = run_sequential(&data, &run_config, &factory, 0)?;
    emit(&args.out, &[report], &run_config, args.window)?;
    Ok(ExitCode::SUCCESS)
}

fn emit(
    out: &PathBuf,
    reports: &[ExperimentReport],
    config: &SequentialConfig,
    window: usize,
) -> anyhow::Result<()> {
    std::fs::create_dir_all(out)?;
    write_results(&out.join("results.csv"), reports)?;
    let summaries = summarize(reports, &config.methods);
    write_summary(&out.join("summary.csv"), &summaries)?;
    write_rolling(&out.join("rolling.csv"), reports, &config.methods, window)?;
    for s in &summaries {
        println!(
            "{:<12} coverage {:.3}  width {:.3}",
            s.method.label(),
            s.mean_coverage,
            s.mean_width
        );
    }
    Ok(())
}

pub fn bounds(args: BoundsArgs) -> anyhow::Result<ExitCode> {
    match args.which {
        BoundsCommand::Drift { eps, rho, n } => {
            if !(0.0..=1.0).contains(&eps) {
                usage!("--eps {eps} must lie in [0, 1]");
            }
            if !(rho > 0.0 && rho < 1.0) {
                usage!("--rho {rho} must lie in (0, 1)");
            }
            if n == 0 {
                usage!("--n must be at least 1");
            }
            let (exact, closed) = nexcp_core::diagnostics::drift_gap_bound(eps, rho, n)?;
            println!("exact {}", fmt_f64(exact));
            println!("bound {}", fmt_f64(closed));
        }
        BoundsCommand::Changepoint { rho, k, n } => {
            if !(rho > 0.0 && rho <= 1.0) {
                usage!("--rho {rho} must lie in (0, 1]");
            }
            if n == 0 || k > n {
                usage!("need 0 <= k <= n with n >= 1");
            }
            let (exact, closed) = nexcp_core::diagnostics::changepoint_gap_bound(rho, k, n)?;
            println!("exact {}", fmt_f64(exact));
            println!("bound {}", fmt_f64(closed));
        }
        BoundsCommand::Huber {
            alpha,
            eps,
            rho,
            n,
            factor,
        } => {
            if !(alpha > 0.0 && alpha < 1.0) {
                usage!("--alpha {alpha} must lie in (0, 1)");
            }
            if !(0.0..=1.0).contains(&eps) {
                usage!("--eps {eps} must lie in [0, 1]");
            }
            if n == 0 {
                usage!("--n must be at least 1");
            }
            if !(factor == 1 || factor == 2) {
                usage!("--factor must be 1 or 2");
            }
            let profile = match rho {
                Some(rho) => {
                    if !(rho > 0.0 && rho <= 1.0) {
                        usage!("--rho {rho} must lie in (0, 1]");
                    }
                    WeightProfile::exponential(rho, n)?
                }
                None => WeightProfile::unit(n),
            };
            let bound = huber_bound(alpha, &profile, &vec![eps; n], factor)?;
            println!("bound {}", fmt_f64(bound));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn random_marginal(rng: &mut impl Rng) -> FiniteMarginal {
    let card = rng.gen_range(2..5);
    let support: Vec<f64> = (0..card).map(|j| j as f64).collect();
    let raw: Vec<f64> = (0..card).map(|_| rng.gen_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    FiniteMarginal::new(support, raw.iter().map(|v| v / total).collect()).unwrap()
}

pub fn diagnose(args: DiagnoseArgs) -> anyhow::Result<ExitCode> {
    if args.fuzz == 0 {
        usage!("--fuzz must be at least 1");
    }
    let factory = StreamFactory::new(args.seed);
    let mut failures = 0usize;

    // Full-conformal strange sets never carry more than alpha of the
    // weighted mass.
    let mut rng = factory.stream(&[purpose::FUZZ, 1]);
    let mut worst: f64 = 0.0;
    let mut bad = 0usize;
    for _ in 0..args.fuzz {
        let n = rng.gen_range(1..30);
        let alpha = rng.gen_range(0.01..0.5);
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let profile = WeightProfile::new(&weights)?;
        let r: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let set = strangeness_full(&r, &profile, alpha)?;
        worst = worst.max(set.weighted_mass - alpha);
        if set.weighted_mass > alpha + 1e-12 {
            bad += 1;
        }
    }
    report_suite("strangeness-full mass <= alpha", args.fuzz, bad, worst, &mut failures);

    // Jackknife strange sets never carry more than 2*alpha.
    let mut rng = factory.stream(&[purpose::FUZZ, 2]);
    let mut worst: f64 = 0.0;
    let mut bad = 0usize;
    for _ in 0..args.fuzz {
        let n = rng.gen_range(1..15);
        let alpha = rng.gen_range(0.01..0.5);
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let profile = WeightProfile::new(&weights)?;
        let r: Vec<Vec<f64>> = (0..=n)
            .map(|_| (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let set = strangeness_jackknife(&r, &profile, alpha)?;
        worst = worst.max(set.weighted_mass - 2.0 * alpha);
        if set.weighted_mass > 2.0 * alpha + 1e-12 {
            bad += 1;
        }
    }
    report_suite(
        "strangeness-jackknife mass <= 2*alpha",
        args.fuzz,
        bad,
        worst,
        &mut failures,
    );

    // Exact swap total-variation distances stay below the closed-form
    // coverage-gap bound, and the mixture distance dominates total
    // variation marginal by marginal.
    let mut rng = factory.stream(&[purpose::FUZZ, 3]);
    let cases = args.fuzz.min(500);
    let mut worst: f64 = 0.0;
    let mut bad = 0usize;
    for _ in 0..cases {
        let d = rng.gen_range(2..5);
        let marginals: Vec<FiniteMarginal> = (0..d).map(|_| random_marginal(&mut rng)).collect();
        for a in &marginals {
            for b in &marginals {
                if tv_discrete(a, b) > dmix_discrete(a, b) + 1e-12 {
                    bad += 1;
                }
            }
        }
        let i = rng.gen_range(1..d);
        let (exact, bound) = lemma1_check(&marginals, i)?;
        worst = worst.max(exact - bound);
        if exact > bound + 1e-9 {
            bad += 1;
        }
    }
    report_suite("swap distance within bound", cases, bad, worst, &mut failures);

    if failures > 0 {
        eprintln!("{failures} suite(s) failed");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn report_suite(name: &str, cases: usize, bad: usize, worst: f64, failures: &mut usize) {
    if bad == 0 {
        println!("PASS {name} ({cases} cases, worst slack {:+.2e})", worst);
    } else {
        println!("FAIL {name} ({bad}/{cases} violations)");
        *failures += 1;
    }
}
