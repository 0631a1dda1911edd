//! The `dirac` command line: `schedule`, `train`, `sample`, `verify` and
//! `sweep`, each driven by one config file.
//!
//! Exit codes: 0 on success, 1 when a verification fails or a run aborts,
//! 2 on usage or config errors.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::config::{DenoiserSetting, ExperimentConfig, ProcessKind};
use crate::degrade::DegradationProcess;
use crate::denoise::{train_affine, AffineDenoiser, Denoiser, LossKind, OracleDenoiser, TrainOutcome};
use crate::error::{Error, Result};
use crate::io::{read_signal, write_pgm, write_signal};
use crate::metrics::psnr;
use crate::prior::GaussianPrior;
use crate::random::RandomSource;
use crate::sampler::{dirac_sample, Observer};
use crate::schedule::{format_schedule, greedy_schedule, DistanceMetric, DistanceTable, ScheduleHeader};
use crate::sdp::{sdp_sample, NoiseSchedule};
use crate::signal::Signal;
use crate::verify::{
    audit_scheduler, check_transitivity, derive_seed, eps_dc, oracle_gap, perception_distortion_sweep,
    robustness_noise_sweep, robustness_width_sweep, verify_theorem_bound_multi, verify_theorem_dc, verify_tweedie,
    CurveSignal, TamperedProcess, NOISE_GRID, WIDTH_GRID,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Largest `N` for which the scheduler suite enumerates all schedules.
const BRUTE_FORCE_LIMIT: usize = 12;
/// Constructed data is consistent well inside this residual.
const NOISELESS_TOLERANCE: f64 = 1e-6;

#[derive(Parser, Debug)]
#[command(name = "dirac", version, about = "Degradation-process reverse sampling toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a greedy degradation schedule.
    Schedule(CommonArgs),
    /// Train the affine denoiser.
    Train(CommonArgs),
    /// Run the reverse sampler on one measurement.
    Sample(CommonArgs),
    /// Run verification suites and report PASS/FAIL.
    Verify(VerifyArgs),
    /// Loss look-ahead ablation: train and sample once per grid value.
    Sweep(CommonArgs),
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Output directory, overriding the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Suite to run (repeatable); overrides the config's list.
    #[arg(long = "suite")]
    pub suites: Vec<String>,
}

/// Parses `args` (including the program name), runs the command, and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => EXIT_USAGE,
                _ => EXIT_FAILURE,
            }
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let (common, suites) = match &cli.command {
        Command::Schedule(a) | Command::Train(a) | Command::Sample(a) | Command::Sweep(a) => (a, None),
        Command::Verify(v) => (&v.common, Some(v.suites.clone())),
    };
    let mut config = ExperimentConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        config.output.dir = out.clone();
    }
    if let Some(suites) = suites.filter(|s| !s.is_empty()) {
        config.verify.suites = suites;
        config.validate()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", common.jobs)))?;
    fs::create_dir_all(&config.output.dir)?;
    pool.install(|| match cli.command {
        Command::Schedule(_) => cmd_schedule(&config),
        Command::Train(_) => cmd_train(&config),
        Command::Sample(_) => cmd_sample(&config),
        Command::Verify(_) => cmd_verify(&config),
        Command::Sweep(_) => cmd_sweep(&config),
    })
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn dataset(prior: &GaussianPrior, size: usize, seed: u64) -> Vec<Signal> {
    let mut rng = RandomSource::new(seed);
    (0..size).map(|_| prior.sample(&mut rng)).collect()
}

pub fn cmd_schedule(config: &ExperimentConfig) -> Result<i32> {
    let prior = config.prior()?;
    let proc = config.unscheduled_process()?;
    let s = &config.schedule;
    let data = dataset(&prior, s.dataset, s.seed);
    let metric = DistanceMetric::parse(&s.metric)?;
    let table = DistanceTable::build(proc.as_ref(), &data, s.candidates, metric)?;
    let outcome = greedy_schedule(&table, s.knots)?;
    for (i, d) in outcome.max_edge_trace.iter().enumerate() {
        println!("knots={i} max_edge={d:.6e}");
    }
    if outcome.degenerate {
        println!("note: distance table is degenerate; schedule is uniform");
    }
    let header = ScheduleHeader {
        process: proc.name().to_string(),
        metric: metric.name().to_string(),
        candidates: s.candidates,
        knots: s.knots,
    };
    write(&config.output.dir, "distances.txt", table.to_text())?;
    let path = write(&config.output.dir, "schedule.txt", format_schedule(&header, &outcome.schedule))?;
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}

pub fn cmd_train(config: &ExperimentConfig) -> Result<i32> {
    let prior = config.prior()?;
    let noise = config.noise()?;
    let proc = config.process()?;
    let t = &config.train;
    let mut model = AffineDenoiser::initialized(prior.mean(), t.bins)?;
    let report =
        train_affine(&mut model, proc.as_ref(), &noise, &prior, &t.train_config(), &mut RandomSource::new(t.seed))?;
    let mut csv = String::from("step,loss\n");
    for (i, l) in report.losses.iter().enumerate() {
        let _ = writeln!(csv, "{i},{l:.8e}");
    }
    write(&config.output.dir, "loss.csv", csv)?;
    if let TrainOutcome::Diverged { step } = report.outcome {
        eprintln!("training diverged at step {step}; loss.csv holds the partial curve");
        return Ok(EXIT_FAILURE);
    }
    let path = config.output.dir.join("model.bin");
    model.save(&path)?;
    if let Some(last) = report.losses.last() {
        println!("final batch loss {last:.6e}");
    }
    let gaps = oracle_gap(&model, proc.as_ref(), &noise, &prior)?;
    for g in &gaps {
        println!(
            "bin t={:.4} model_mse={:.6e} oracle_mse={:.6e} gap={:.4}",
            g.t,
            g.model_mse,
            g.oracle_mse,
            g.relative_gap()
        );
    }
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}

fn denoiser(
    config: &ExperimentConfig,
    prior: &Arc<GaussianPrior>,
    proc: &Arc<dyn DegradationProcess>,
    noise: NoiseSchedule,
) -> Result<Box<dyn Denoiser>> {
    Ok(match config.sampler.denoiser {
        DenoiserSetting::Oracle => Box::new(OracleDenoiser::new(prior.clone(), proc.clone(), noise)?),
        DenoiserSetting::Model => {
            let path = config.model_path();
            if !path.exists() {
                return Err(Error::Config(format!("model file {} does not exist; run `train` first", path.display())));
            }
            Box::new(AffineDenoiser::load(&path, config.shape())?)
        }
    })
}

pub fn cmd_sample(config: &ExperimentConfig) -> Result<i32> {
    let prior = Arc::new(config.prior()?);
    let noise = config.noise()?;
    let proc = config.process()?;
    let den = denoiser(config, &prior, &proc, noise)?;
    let (measurement, truth) = match &config.sampler.measurement {
        Some(path) => {
            let y = read_signal(path)?;
            y.ensure_shape(proc.shape())?;
            (y, None)
        }
        None => {
            let mut rng = RandomSource::new(config.prior.seed);
            let x0 = prior.sample_bounded(&mut rng);
            (sdp_sample(proc.as_ref(), &noise, &x0, 1.0, &mut rng)?, Some(x0))
        }
    };
    let sampler = config.sampler.sampler_config();
    let observer = Observer { truth: truth.as_ref(), prior: Some(&prior) };
    let traj = dirac_sample(den.as_ref(), proc.as_ref(), &noise, &measurement, &sampler, observer)?;

    let dir = &config.output.dir;
    write(dir, "trajectory.csv", traj.to_csv())?;
    write_signal(&dir.join("measurement.sig"), &measurement)?;
    write_signal(&dir.join("output.sig"), &traj.output)?;
    if config.sampler.images {
        write_pgm(&dir.join("measurement.pgm"), &measurement)?;
        write_pgm(&dir.join("output.pgm"), &traj.output)?;
        write_pgm(&dir.join("final_iterate.pgm"), &traj.final_iterate)?;
        if let Some(x0) = &truth {
            write_pgm(&dir.join("truth.pgm"), x0)?;
        }
    }
    if let Some(msg) = &traj.failure {
        eprintln!("sampling aborted: {msg}");
        return Ok(EXIT_FAILURE);
    }
    if let Some(x0) = &truth {
        println!("psnr {:.4}", psnr(&traj.output, x0, 1.0)?);
    }
    println!("prior_nll {:.4}", prior.nll(&traj.output)?);
    println!("eps_dc {:.6e}", eps_dc(proc.as_ref(), &measurement, &traj.output)?);
    println!("steps {}", traj.steps.len());
    Ok(EXIT_OK)
}

/// Outcome of one verification suite.
#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub csv: String,
}

impl SuiteResult {
    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

pub fn cmd_verify(config: &ExperimentConfig) -> Result<i32> {
    let dir = config.output.dir.join("verify");
    fs::create_dir_all(&dir)?;
    let mut summary = String::new();
    let mut all = true;
    for name in config.verify.selected() {
        let result = run_suite(config, name)?;
        write(&dir, &format!("{name}.csv"), &result.csv)?;
        let line = result.line();
        println!("{line}");
        let _ = std::io::stdout().flush();
        summary.push_str(&line);
        summary.push('\n');
        all &= result.pass;
    }
    write(&dir, "summary.txt", summary)?;
    Ok(if all { EXIT_OK } else { EXIT_FAILURE })
}

/// Runs one named suite.
pub fn run_suite(config: &ExperimentConfig, name: &str) -> Result<SuiteResult> {
    match name {
        "tweedie" => suite_tweedie(config),
        "thm34" => suite_bound(config),
        "thm36" => suite_consistency(config),
        "transitivity" => suite_transitivity(config),
        "pd-curve" => suite_curve(config),
        "robustness" => suite_robustness(config),
        "scheduler" => suite_scheduler(config),
        other => Err(Error::Config(format!("unknown suite '{other}'"))),
    }
}

/// The config with a different operator family; the schedule file only
/// carries over to its own family.
fn with_kind(config: &ExperimentConfig, kind: ProcessKind) -> ExperimentConfig {
    let mut c = config.clone();
    if c.process.kind != kind {
        c.process.schedule = None;
    }
    c.process.kind = kind;
    c
}

fn suite_tweedie(config: &ExperimentConfig) -> Result<SuiteResult> {
    let prior = Arc::new(config.prior()?);
    let noise = config.noise()?;
    let v = &config.verify;
    let kinds = [ProcessKind::Blur, ProcessKind::Inpaint, ProcessKind::Blend];
    let reports = kinds
        .par_iter()
        .enumerate()
        .map(|(i, kind)| {
            let proc = with_kind(config, *kind).process()?;
            let oracle = OracleDenoiser::new(prior.clone(), proc.clone(), noise)?;
            let mut rng = RandomSource::new(derive_seed(v.seed, i as u64));
            verify_tweedie(&oracle, proc.as_ref(), &noise, &prior, v.tweedie_draws, v.tweedie_tolerance, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("process,t,score_error,posterior_error\n");
    let mut detail = Vec::new();
    for (kind, r) in kinds.iter().zip(&reports) {
        for row in &r.rows {
            let _ = writeln!(csv, "{},{:.8e},{:.8e},{:.8e}", kind.name(), row.t, row.score_error, row.posterior_error);
        }
        detail.push(format!("{} max rel err {:.2e}", kind.name(), r.max_error()));
    }
    Ok(SuiteResult {
        name: "tweedie",
        pass: reports.iter().all(|r| r.pass()),
        detail: format!("{} (tol {:.0e})", detail.join(", "), v.tweedie_tolerance),
        csv,
    })
}

fn suite_bound(config: &ExperimentConfig) -> Result<SuiteResult> {
    let prior = config.prior()?;
    let noise = config.noise()?;
    let proc = config.process()?;
    let v = &config.verify;
    let reports = verify_theorem_bound_multi(
        proc.as_ref(),
        &noise,
        &prior,
        v.delta_t,
        &v.bound_epsilons,
        v.bound_trials,
        &mut RandomSource::new(v.seed),
    )?;
    let mut csv = String::from("epsilon,t,lhs,rhs\n");
    let mut detail = Vec::new();
    for r in &reports {
        for row in &r.rows {
            let _ = writeln!(csv, "{:.8e},{:.8e},{:.8e},{:.8e}", r.epsilon, row.t, row.lhs, row.rhs);
        }
        detail.push(format!(
            "eps {} violations {}/{} max lhs {:.3e} min rhs {:.3e}",
            r.epsilon,
            r.violations(),
            r.rows.len(),
            r.max_lhs(),
            r.min_rhs()
        ));
    }
    Ok(SuiteResult {
        name: "thm34",
        pass: reports.iter().all(|r| r.pass()),
        detail: format!("{} ({}; L_t est {:.3})", detail.join(", "), proc.name(), reports[0].lt_estimate),
        csv,
    })
}

/// The consistency harness needs exact transitions, so it always runs on the
/// inpainting family built from this config.
fn suite_consistency(config: &ExperimentConfig) -> Result<SuiteResult> {
    let noise = config.noise()?;
    let prior = config.prior()?;
    let proc = with_kind(config, ProcessKind::Inpaint).process()?;
    let v = &config.verify;
    let x0 = prior.sample_bounded(&mut RandomSource::new(v.seed));
    let report = if v.fault != 0.0 {
        verify_theorem_dc(&TamperedProcess::new(proc.clone(), v.fault), &noise, &x0, v.delta_t, v.seeds, v.seed)?
    } else {
        verify_theorem_dc(&proc, &noise, &x0, v.delta_t, v.seeds, v.seed)?
    };
    let max_transition = report.transition_errors.iter().copied().fold(0.0, f64::max);
    Ok(SuiteResult {
        name: "thm36",
        pass: report.pass(),
        detail: format!(
            "S={} max deviation {:.3e} (tol {:.3e}), max residual {:.3e}, max transition error {:.3e} (tol {:.3e}), {} of {} verdicts consistent",
            v.seeds,
            report.max_deviation(),
            report.deviation_tolerance,
            report.max_residual(),
            max_transition,
            report.consistency_tolerance,
            report.verdicts.iter().filter(|v| v.consistent).count(),
            report.verdicts.len(),
        ),
        csv: report.to_csv(),
    })
}

fn suite_transitivity(config: &ExperimentConfig) -> Result<SuiteResult> {
    let prior = config.prior()?;
    let proc = config.process()?;
    let v = &config.verify;
    // Chains are built with the transition maps, so they are only as
    // consistent as the family's declared composition accuracy.
    let tolerance = NOISELESS_TOLERANCE.max(proc.composition_tolerance());
    let r = check_transitivity(proc.as_ref(), &prior, v.triples, tolerance, &mut RandomSource::new(v.seed))?;
    Ok(SuiteResult {
        name: "transitivity",
        pass: r.pass(),
        detail: format!(
            "{}: {} triples, premises held {}, conclusions held {}, max residual {:.3e} (tol {:.0e})",
            proc.name(),
            r.triples,
            r.premises_held,
            r.conclusions_held,
            r.max_residual,
            tolerance
        ),
        csv: format!(
            "triples,premises_held,conclusions_held,max_residual\n{},{},{},{:.8e}\n",
            r.triples, r.premises_held, r.conclusions_held, r.max_residual
        ),
    })
}

fn suite_curve(config: &ExperimentConfig) -> Result<SuiteResult> {
    let prior = Arc::new(config.prior()?);
    let noise = config.noise()?;
    let proc = config.process()?;
    let oracle = OracleDenoiser::new(prior.clone(), proc.clone(), noise)?;
    let v = &config.verify;
    let r = perception_distortion_sweep(
        &oracle,
        proc.as_ref(),
        &noise,
        &prior,
        &config.sampler.sampler_config(),
        v.runs,
        v.seed,
        CurveSignal::Iterate,
    )?;
    let (peak, last) = (r.peak(), r.last());
    Ok(SuiteResult {
        name: "pd-curve",
        pass: r.interior_peak() && r.nll_improves_after_peak(),
        detail: format!(
            "{} runs on {}: psnr peak {:.3} at t={:.3}, final t={:.3} psnr {:.3}; nll at peak {:.2}, final {:.2}",
            r.runs,
            proc.name(),
            peak.psnr_mean,
            peak.t,
            last.t,
            last.psnr_mean,
            peak.nll_mean,
            last.nll_mean
        ),
        csv: r.to_csv(),
    })
}

/// Passes when every row is finite and, for blur, the unit width multiplier
/// reproduces the nominal-noise row exactly (two routes to the unperturbed
/// run).
fn suite_robustness(config: &ExperimentConfig) -> Result<SuiteResult> {
    let prior = Arc::new(config.prior()?);
    let noise = config.noise()?;
    let proc = config.process()?;
    let oracle = OracleDenoiser::new(prior.clone(), proc.clone(), noise)?;
    let v = &config.verify;
    let sampler = config.sampler.sampler_config();
    let mut sigmas = NOISE_GRID.to_vec();
    if !sigmas.contains(&noise.sigma_one()) {
        sigmas.push(noise.sigma_one());
    }
    let by_noise = robustness_noise_sweep(&oracle, proc.as_ref(), &noise, &prior, &sigmas, &sampler, v.runs, v.seed)?;
    let mut csv = String::from("sweep,value,psnr_mean,psnr_std,nll_mean,eps_dc_mean\n");
    let push_rows = |csv: &mut String, sweep: &str, rows: &[crate::verify::RobustnessRow]| {
        for r in rows {
            let _ = writeln!(
                csv,
                "{sweep},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
                r.value, r.psnr_mean, r.psnr_std, r.nll_mean, r.eps_dc_mean
            );
        }
    };
    push_rows(&mut csv, "sigma", &by_noise.rows);
    let mut finite = by_noise.rows.iter().all(|r| r.psnr_mean.is_finite() && r.eps_dc_mean.is_finite());
    let mut detail = format!("{} sigma rows", by_noise.rows.len());
    let mut reproduces = true;
    if let Some(blur) = config.blur_process()? {
        let by_width = robustness_width_sweep(&oracle, &blur, &noise, &prior, &WIDTH_GRID, &sampler, v.runs, v.seed)?;
        push_rows(&mut csv, "width", &by_width.rows);
        finite &= by_width.rows.iter().all(|r| r.psnr_mean.is_finite() && r.eps_dc_mean.is_finite());
        let unit = by_width.rows.iter().find(|r| r.value == 1.0);
        let nominal = by_noise.rows.iter().find(|r| r.value == noise.sigma_one());
        reproduces = match (unit, nominal) {
            (Some(a), Some(b)) => {
                a.psnr_mean == b.psnr_mean && a.nll_mean == b.nll_mean && a.eps_dc_mean == b.eps_dc_mean
            }
            _ => false,
        };
        let psnrs: Vec<String> = by_width.rows.iter().map(|r| format!("{}:{:.2}", r.value, r.psnr_mean)).collect();
        detail =
            format!("{detail}, width psnr [{}], unit multiplier reproduces nominal run: {reproduces}", psnrs.join(" "));
    }
    let psnrs: Vec<String> = by_noise.rows.iter().map(|r| format!("{}:{:.2}", r.value, r.psnr_mean)).collect();
    detail = format!("{detail}, sigma psnr [{}]", psnrs.join(" "));
    Ok(SuiteResult { name: "robustness", pass: finite && reproduces, detail, csv })
}

fn suite_scheduler(config: &ExperimentConfig) -> Result<SuiteResult> {
    let prior = config.prior()?;
    let proc = config.unscheduled_process()?;
    let s = &config.schedule;
    let data = dataset(&prior, s.dataset, s.seed);
    let table = DistanceTable::build(proc.as_ref(), &data, s.candidates, DistanceMetric::parse(&s.metric)?)?;
    let brute = s.candidates <= BRUTE_FORCE_LIMIT;
    let mut csv = String::from("m,greedy,uniform,optimum,monotone,pass\n");
    let mut pass = true;
    let mut misses = Vec::new();
    for m in 0..=s.knots {
        let a = audit_scheduler(&table, m, brute)?;
        let opt = a.optimum.map_or("".to_string(), |o| format!("{o:.8e}"));
        let _ = writeln!(csv, "{m},{:.8e},{:.8e},{opt},{},{}", a.greedy, a.uniform, a.monotone, a.pass());
        if !a.pass() {
            misses.push(match a.optimum {
                Some(o) if a.matches_optimum() == Some(false) => {
                    format!("m={m} greedy {:.4} vs optimum {o:.4}", a.greedy)
                }
                _ => format!("m={m} greedy {:.4} uniform {:.4} monotone {}", a.greedy, a.uniform, a.monotone),
            });
        }
        pass &= a.pass();
    }
    let detail = if misses.is_empty() {
        format!(
            "{} N={} m<={}: greedy <= uniform, monotone{}",
            proc.name(),
            s.candidates,
            s.knots,
            if brute { ", optimal" } else { "" }
        )
    } else {
        format!("{} N={}: {}", proc.name(), s.candidates, misses.join("; "))
    };
    Ok(SuiteResult { name: "scheduler", pass, detail, csv })
}

/// Trains one model per loss look-ahead in `train.ablation` and samples the
/// same measurements with each.
pub fn cmd_sweep(config: &ExperimentConfig) -> Result<i32> {
    let prior = Arc::new(config.prior()?);
    let noise = config.noise()?;
    let proc = config.process()?;
    let t = &config.train;
    let sampler = config.sampler.sampler_config();
    let rows = t
        .ablation
        .par_iter()
        .map(|delta_t| {
            let mut model = AffineDenoiser::initialized(prior.mean(), t.bins)?;
            let mut train = t.train_config();
            train.loss = LossKind::Incremental { delta_t: *delta_t };
            let report =
                train_affine(&mut model, proc.as_ref(), &noise, &prior, &train, &mut RandomSource::new(t.seed))?;
            if let TrainOutcome::Diverged { step } = report.outcome {
                return Err(Error::Numerical(format!("training with Δt = {delta_t} diverged at step {step}")));
            }
            let mut sums = [0.0; 3];
            for r in 0..t.ablation_runs as u64 {
                let mut rng = RandomSource::new(derive_seed(config.prior.seed, 2 * r));
                let x0 = prior.sample_bounded(&mut rng);
                let y = sdp_sample(proc.as_ref(), &noise, &x0, 1.0, &mut rng)?;
                let cfg = crate::sampler::SamplerConfig { seed: derive_seed(config.prior.seed, 2 * r + 1), ..sampler };
                let traj = dirac_sample(&model, proc.as_ref(), &noise, &y, &cfg, Observer::default())?;
                if let Some(msg) = traj.failure {
                    return Err(Error::Numerical(msg));
                }
                sums[0] += psnr(&traj.output, &x0, 1.0)?;
                sums[1] += prior.nll(&traj.output)?;
                sums[2] += eps_dc(proc.as_ref(), &y, &traj.output)?;
            }
            let k = t.ablation_runs as f64;
            Ok((*delta_t, sums[0] / k, sums[1] / k, sums[2] / k))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("loss_delta_t,psnr_mean,nll_mean,eps_dc_mean\n");
    for (d, p, n, e) in &rows {
        let _ = writeln!(csv, "{d:.8e},{p:.8e},{n:.8e},{e:.8e}");
        println!("loss_delta_t={d} psnr={p:.4} nll={n:.3} eps_dc={e:.4e}");
    }
    let path = write(&config.output.dir, "sweep.csv", csv)?;
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}
