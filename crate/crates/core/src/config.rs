//! Experiment configuration: a sectioned TOML file holding every parameter
//! and seed of a run.
//!
//! Unknown keys are rejected, every number is range-checked, and relative
//! paths resolve against the directory holding the config file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::degrade::{BlendingProcess, DegradationProcess, GaussianBlurProcess, GaussianMaskInpaintProcess};
use crate::denoise::{LossKind, TrainConfig};
use crate::error::{Error, Result};
use crate::prior::GaussianPrior;
use crate::sampler::{GuidanceMode, IncrementVariant, OutputMode, SamplerConfig};
use crate::schedule::{parse_schedule, DistanceMetric, SeveritySchedule};
use crate::sdp::NoiseSchedule;
use crate::signal::{Shape, Signal};

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub process: ProcessSection,
    pub noise: NoiseSection,
    pub prior: PriorSection,
    pub schedule: ScheduleSection,
    pub train: TrainSection,
    pub sampler: SamplerSection,
    pub verify: VerifySection,
    pub output: OutputSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    Blur,
    Inpaint,
    Blend,
}

impl ProcessKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProcessKind::Blur => "blur",
            ProcessKind::Inpaint => "inpaint",
            ProcessKind::Blend => "blend",
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProcessSection {
    pub kind: ProcessKind,
    /// Blur width at `t = 0`.
    pub w_min: f64,
    /// Blur width at `t = 1`.
    pub w_max: f64,
    /// Odd blur kernel size; derived from `w_max` when absent.
    pub kernel_size: Option<usize>,
    /// Terminal inpainting mask width; one fifth of the longer side when absent.
    pub w1: Option<f64>,
    /// Inpainting mask exponent.
    pub k: u32,
    /// Constant blending target.
    pub anchor: f64,
    /// Schedule file replacing the linear parameter ramp.
    pub schedule: Option<PathBuf>,
}

impl Default for ProcessSection {
    fn default() -> Self {
        ProcessSection {
            kind: ProcessKind::Blur,
            w_min: 0.3,
            w_max: 3.0,
            kernel_size: None,
            w1: None,
            k: 4,
            anchor: 0.0,
            schedule: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection { sigma_min: 0.01, sigma_max: 0.05 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorSection {
    pub height: usize,
    pub width: usize,
    pub length_scale: f64,
    pub jitter: f64,
    pub mean: f64,
    /// Seed for clean signals drawn by `sample`.
    pub seed: u64,
}

impl Default for PriorSection {
    fn default() -> Self {
        PriorSection { height: 16, width: 16, length_scale: 2.0, jitter: 1e-4, mean: 0.5, seed: 1 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    /// Candidate severities `N`.
    pub candidates: usize,
    /// Interior knots `m`.
    pub knots: usize,
    pub metric: String,
    /// Prior draws averaged into each table entry.
    pub dataset: usize,
    pub seed: u64,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        ScheduleSection { candidates: 12, knots: 3, metric: "rmse".into(), dataset: 16, seed: 2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossSetting {
    Denoising,
    Incremental,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub loss: LossSetting,
    /// Look-ahead of the incremental loss.
    pub delta_t: f64,
    pub bins: usize,
    pub steps: usize,
    pub step_size: f64,
    pub batch_size: usize,
    pub probe_size: usize,
    pub seed: u64,
    /// Loss look-aheads compared by `sweep`.
    pub ablation: Vec<f64>,
    /// Measurements sampled per ablation point.
    pub ablation_runs: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            loss: LossSetting::Incremental,
            delta_t: 1.0,
            bins: 8,
            steps: 2000,
            step_size: 1.0,
            batch_size: 32,
            probe_size: 256,
            seed: 3,
            ablation: vec![0.0, 0.25, 0.5, 1.0],
            ablation_runs: 20,
        }
    }
}

impl TrainSection {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            loss: match self.loss {
                LossSetting::Denoising => LossKind::Denoising,
                LossSetting::Incremental => LossKind::Incremental { delta_t: self.delta_t },
            },
            steps: self.steps,
            step_size: self.step_size,
            batch_size: self.batch_size,
            probe_size: self.probe_size,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenoiserSetting {
    Oracle,
    Model,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidanceSetting {
    None,
    Std,
    Error,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputSetting {
    Iterate,
    PosteriorMean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantSetting {
    LookAhead,
    SmallLookAhead,
    LookBack,
    SmallLookBack,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub denoiser: DenoiserSetting,
    /// Trained model file; `model.bin` in the output directory when absent.
    pub model: Option<PathBuf>,
    /// Measurement file; a fresh draw from the prior when absent.
    pub measurement: Option<PathBuf>,
    pub delta_t: f64,
    pub t_stop: f64,
    pub eta: f64,
    pub guidance: GuidanceSetting,
    pub output: OutputSetting,
    pub variant: VariantSetting,
    /// `δt` of the small-step variants.
    pub small_delta: f64,
    pub seed: u64,
    /// Write PGM images next to the trajectory CSV.
    pub images: bool,
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection {
            denoiser: DenoiserSetting::Oracle,
            model: None,
            measurement: None,
            delta_t: 0.02,
            t_stop: 0.0,
            eta: 0.5,
            guidance: GuidanceSetting::Std,
            output: OutputSetting::PosteriorMean,
            variant: VariantSetting::LookAhead,
            small_delta: 0.005,
            seed: 4,
            images: false,
        }
    }
}

impl SamplerSection {
    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            delta_t: self.delta_t,
            t_stop: self.t_stop,
            eta: self.eta,
            guidance: match self.guidance {
                GuidanceSetting::None => GuidanceMode::None,
                GuidanceSetting::Std => GuidanceMode::StdScaled,
                GuidanceSetting::Error => GuidanceMode::ErrorScaled,
            },
            output: match self.output {
                OutputSetting::Iterate => OutputMode::FinalIterate,
                OutputSetting::PosteriorMean => OutputMode::PosteriorMean,
            },
            variant: match self.variant {
                VariantSetting::LookAhead => IncrementVariant::LookAhead,
                VariantSetting::SmallLookAhead => IncrementVariant::SmallLookAhead { delta: self.small_delta },
                VariantSetting::LookBack => IncrementVariant::LookBack,
                VariantSetting::SmallLookBack => IncrementVariant::SmallLookBack { delta: self.small_delta },
            },
            seed: self.seed,
        }
    }
}

pub const SUITES: [&str; 7] = ["tweedie", "thm34", "thm36", "transitivity", "pd-curve", "robustness", "scheduler"];

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// Suites to run; all when empty.
    pub suites: Vec<String>,
    pub seed: u64,
    /// Random `(y, t)` pairs per operator for the score identity.
    pub tweedie_draws: usize,
    pub tweedie_tolerance: f64,
    /// Step of the consistency harness and of the bound audit.
    pub delta_t: f64,
    /// Trajectories averaged by the consistency harness.
    pub seeds: usize,
    /// Constant shift added to every transition in the consistency harness.
    /// Nonzero values are a fault-injection control and should FAIL.
    pub fault: f64,
    pub bound_trials: usize,
    pub bound_epsilons: Vec<f64>,
    pub triples: usize,
    /// Trajectories per curve point and per robustness row.
    pub runs: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            suites: Vec::new(),
            seed: 5,
            tweedie_draws: 20,
            tweedie_tolerance: 1e-8,
            delta_t: 0.05,
            seeds: 256,
            fault: 0.0,
            bound_trials: 200,
            bound_epsilons: vec![0.0, 0.05, 0.1],
            triples: 50,
            runs: 30,
        }
    }
}

impl VerifySection {
    /// Selected suite names in canonical order.
    pub fn selected(&self) -> Vec<&'static str> {
        if self.suites.is_empty() {
            return SUITES.to_vec();
        }
        SUITES.iter().copied().filter(|s| self.suites.iter().any(|x| x == s)).collect()
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out") }
    }
}

impl ExperimentConfig {
    /// Parses and validates `text`; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.resolve(base);
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.process.schedule.as_mut() {
            fix(p);
        }
        if let Some(p) = self.sampler.model.as_mut() {
            fix(p);
        }
        if let Some(p) = self.sampler.measurement.as_mut() {
            fix(p);
        }
        fix(&mut self.output.dir);
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.process;
        positive("process.w_min", p.w_min)?;
        positive("process.w_max", p.w_max)?;
        if p.w_max < p.w_min {
            return Err(Error::Config("process.w_max must be >= process.w_min".into()));
        }
        if let Some(k) = p.kernel_size {
            if k % 2 == 0 || k == 0 {
                return Err(Error::Config("process.kernel_size must be odd".into()));
            }
        }
        if let Some(w1) = p.w1 {
            positive("process.w1", w1)?;
        }
        if !(1..=16).contains(&p.k) {
            return Err(Error::Config("process.k must lie in [1, 16]".into()));
        }
        finite("process.anchor", p.anchor)?;
        for path in [&p.schedule, &self.sampler.model, &self.sampler.measurement].into_iter().flatten() {
            if !path.exists() {
                return Err(Error::Config(format!("referenced file {} does not exist", path.display())));
            }
        }

        let n = &self.noise;
        non_negative("noise.sigma_min", n.sigma_min)?;
        non_negative("noise.sigma_max", n.sigma_max)?;
        if (n.sigma_min == 0.0) != (n.sigma_max == 0.0) || n.sigma_max < n.sigma_min {
            return Err(Error::Config("noise needs 0 < sigma_min <= sigma_max, or both zero".into()));
        }

        let pr = &self.prior;
        if !(1..=64).contains(&pr.height) || !(1..=64).contains(&pr.width) {
            return Err(Error::Config("prior.height and prior.width must lie in [1, 64]".into()));
        }
        positive("prior.length_scale", pr.length_scale)?;
        non_negative("prior.jitter", pr.jitter)?;
        finite("prior.mean", pr.mean)?;

        let s = &self.schedule;
        if !(2..=64).contains(&s.candidates) {
            return Err(Error::Config("schedule.candidates must lie in [2, 64]".into()));
        }
        if s.knots + 2 > s.candidates {
            return Err(Error::Config("schedule.knots must be at most candidates - 2".into()));
        }
        DistanceMetric::parse(&s.metric).map_err(|e| Error::Config(format!("schedule.metric: {e}")))?;
        if s.dataset == 0 {
            return Err(Error::Config("schedule.dataset must be positive".into()));
        }

        let t = &self.train;
        unit("train.delta_t", t.delta_t)?;
        if t.bins == 0 || t.bins > 64 {
            return Err(Error::Config("train.bins must lie in [1, 64]".into()));
        }
        positive("train.step_size", t.step_size)?;
        if t.batch_size == 0 || t.probe_size == 0 {
            return Err(Error::Config("train.batch_size and train.probe_size must be positive".into()));
        }
        for d in &t.ablation {
            unit("train.ablation", *d)?;
        }
        if t.ablation_runs == 0 {
            return Err(Error::Config("train.ablation_runs must be positive".into()));
        }

        self.sampler.sampler_config().validate().map_err(|e| Error::Config(format!("sampler: {e}")))?;

        let v = &self.verify;
        for name in &v.suites {
            if !SUITES.contains(&name.as_str()) {
                return Err(Error::Config(format!("unknown suite '{name}' (expected one of {})", SUITES.join(", "))));
            }
        }
        if v.tweedie_draws == 0 || v.seeds == 0 || v.bound_trials == 0 || v.triples == 0 || v.runs == 0 {
            return Err(Error::Config("verify counts must be positive".into()));
        }
        positive("verify.tweedie_tolerance", v.tweedie_tolerance)?;
        if !(v.delta_t > 0.0 && v.delta_t < 0.5) {
            return Err(Error::Config("verify.delta_t must lie in (0, 0.5)".into()));
        }
        finite("verify.fault", v.fault)?;
        if v.bound_epsilons.is_empty() {
            return Err(Error::Config("verify.bound_epsilons must not be empty".into()));
        }
        for e in &v.bound_epsilons {
            non_negative("verify.bound_epsilons", *e)?;
        }
        Ok(())
    }

    pub fn shape(&self) -> Shape {
        Shape::grid(self.prior.height, self.prior.width)
    }

    pub fn noise(&self) -> Result<NoiseSchedule> {
        if self.noise.sigma_max == 0.0 {
            return Ok(NoiseSchedule::noiseless());
        }
        NoiseSchedule::new(self.noise.sigma_min, self.noise.sigma_max)
    }

    pub fn prior(&self) -> Result<GaussianPrior> {
        let p = &self.prior;
        GaussianPrior::squared_exponential(self.shape(), p.length_scale, p.jitter, p.mean)
    }

    /// The configured process, with the schedule file applied when set.
    pub fn process(&self) -> Result<Arc<dyn DegradationProcess>> {
        let schedule = match &self.process.schedule {
            Some(path) => Some(parse_schedule(&std::fs::read_to_string(path)?)?.1),
            None => None,
        };
        self.build_process(schedule)
    }

    /// The configured process with its linear parameter ramp, ignoring any
    /// schedule file.
    pub fn unscheduled_process(&self) -> Result<Arc<dyn DegradationProcess>> {
        self.build_process(None)
    }

    fn build_process(&self, schedule: Option<SeveritySchedule>) -> Result<Arc<dyn DegradationProcess>> {
        let shape = self.shape();
        let p = &self.process;
        Ok(match p.kind {
            ProcessKind::Blur => {
                let schedule = match schedule {
                    Some(s) => s,
                    None => SeveritySchedule::linear(p.w_min, p.w_max)?,
                };
                Arc::new(GaussianBlurProcess::with_schedule(shape, schedule, p.kernel_size)?)
            }
            ProcessKind::Inpaint => {
                let w1 = p.w1.unwrap_or_else(|| GaussianMaskInpaintProcess::default_w1(shape));
                let schedule = match schedule {
                    Some(s) => s,
                    None => SeveritySchedule::linear(0.0, w1)?,
                };
                Arc::new(GaussianMaskInpaintProcess::with_schedule(
                    shape,
                    schedule,
                    p.k,
                    crate::degrade::default_center(shape),
                )?)
            }
            ProcessKind::Blend => {
                if schedule.is_some() {
                    return Err(Error::Config("the blending process takes no schedule file".into()));
                }
                Arc::new(BlendingProcess::new(Signal::constant(shape, p.anchor))?)
            }
        })
    }

    /// The blur family of this config, for the width robustness sweep.
    pub fn blur_process(&self) -> Result<Option<GaussianBlurProcess>> {
        if self.process.kind != ProcessKind::Blur {
            return Ok(None);
        }
        let schedule = match &self.process.schedule {
            Some(path) => parse_schedule(&std::fs::read_to_string(path)?)?.1,
            None => SeveritySchedule::linear(self.process.w_min, self.process.w_max)?,
        };
        Ok(Some(GaussianBlurProcess::with_schedule(self.shape(), schedule, self.process.kernel_size)?))
    }

    pub fn model_path(&self) -> PathBuf {
        self.sampler.model.clone().unwrap_or_else(|| self.output.dir.join("model.bin"))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::Config(format!("{name} must be finite")));
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Config(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
    }
    Ok(())
}

fn unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
    }
    Ok(())
}
