//! C ABI over the `dirac` crate.
//!
//! Every function returns a [`DiracStatus`]; on failure the message is kept
//! per thread and can be read with [`dirac_last_error`]. Objects are opaque
//! handles created by `*_new_*` functions and released with the matching
//! `*_free`. Signals are row-major `double` buffers of `height * width`
//! entries.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use dirac::degrade::{BlendingProcess, DegradationProcess, GaussianBlurProcess, GaussianMaskInpaintProcess};
use dirac::denoise::OracleDenoiser;
use dirac::prior::GaussianPrior;
use dirac::random::RandomSource;
use dirac::sampler::{dirac_sample, GuidanceMode, IncrementVariant, Observer, OutputMode, SamplerConfig, Trajectory};
use dirac::sdp::{sdp_sample, NoiseSchedule};
use dirac::{Error, Shape, Signal};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiracStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    Numerical = 4,
    Unsupported = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiracGuidance {
    None = 0,
    StdScaled = 1,
    ErrorScaled = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiracOutput {
    FinalIterate = 0,
    PosteriorMean = 1,
}

/// Sampler settings. Always look-ahead increments.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct DiracSamplerOptions {
    pub delta_t: f64,
    pub t_stop: f64,
    pub eta: f64,
    pub guidance: DiracGuidance,
    pub output: DiracOutput,
    pub seed: u64,
}

/// Diagnostics recorded at the start of one sampler step. `psnr` is NaN when
/// no ground truth was supplied.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct DiracStep {
    pub t: f64,
    pub eps_dc: f64,
    pub psnr: f64,
    pub prior_nll: f64,
}

/// Gaussian prior over a 2-D grid.
pub struct DiracPrior(Arc<GaussianPrior>);

/// Degradation operator family.
pub struct DiracProcess(Arc<dyn DegradationProcess>);

/// Result of one sampler run.
pub struct DiracTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(DiracStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::ShapeMismatch { .. } => DiracStatus::ShapeMismatch,
            Error::InvalidParameter(_) | Error::Config(_) | Error::Format(_) => DiracStatus::InvalidArgument,
            Error::NotPositiveDefinite(_) | Error::Numerical(_) => DiracStatus::Numerical,
            Error::Unsupported(_) => DiracStatus::Unsupported,
            Error::Io(_) => DiracStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DiracStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DiracStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DiracStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            DiracStatus::Panic
        }
    }
}

fn grid(height: usize, width: usize) -> Result<Shape, Failure> {
    if height == 0 || width == 0 {
        return Err(Failure(DiracStatus::InvalidArgument, "grid dimensions must be positive".into()));
    }
    Ok(Shape::grid(height, width))
}

unsafe fn read_signal(shape: Shape, data: *const f64, len: usize, what: &str) -> Result<Signal, Failure> {
    if data.is_null() {
        return Err(null(what));
    }
    if len != shape.len() {
        return Err(Failure(DiracStatus::ShapeMismatch, format!("{what} has {len} entries, expected {}", shape.len())));
    }
    Ok(Signal::new(shape, std::slice::from_raw_parts(data, len).to_vec())?)
}

unsafe fn write_signal(s: &Signal, out: *mut f64, len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if len != s.len() {
        return Err(Failure(
            DiracStatus::ShapeMismatch,
            format!("output buffer has {len} entries, expected {}", s.len()),
        ));
    }
    std::slice::from_raw_parts_mut(out, len).copy_from_slice(s.as_slice());
    Ok(())
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn dirac_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dirac_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Squared-exponential prior with constant mean.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn dirac_prior_new(
    height: usize,
    width: usize,
    length_scale: f64,
    jitter: f64,
    mean: f64,
    out: *mut *mut DiracPrior,
) -> DiracStatus {
    guard(|| {
        let prior = GaussianPrior::squared_exponential(grid(height, width)?, length_scale, jitter, mean)?;
        put(out, DiracPrior(Arc::new(prior)))
    })
}

/// Draws a sample whose entries all lie within `max|μ| + 4·max σ`.
///
/// # Safety
/// `prior` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dirac_prior_sample(
    prior: *const DiracPrior,
    seed: u64,
    out: *mut f64,
    len: usize,
) -> DiracStatus {
    guard(|| {
        let prior = handle(prior, "prior")?;
        write_signal(&prior.0.sample_bounded(&mut RandomSource::new(seed)), out, len)
    })
}

/// Negative log-density of `x` under the prior.
///
/// # Safety
/// `prior` must be a live handle, `x` must hold `len` doubles and `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn dirac_prior_nll(
    prior: *const DiracPrior,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> DiracStatus {
    guard(|| {
        let prior = handle(prior, "prior")?;
        let x = read_signal(prior.0.shape(), x, len, "x")?;
        let value = prior.0.nll(&x)?;
        *out.as_mut().ok_or_else(|| null("out"))? = value;
        Ok(())
    })
}

/// # Safety
/// `prior` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dirac_prior_free(prior: *mut DiracPrior) {
    if !prior.is_null() {
        drop(Box::from_raw(prior));
    }
}

/// Separable Gaussian blur whose width grows linearly from `w_min` to
/// `w_max`. `kernel_size` 0 picks the size from `w_max`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn dirac_process_new_blur(
    height: usize,
    width: usize,
    w_min: f64,
    w_max: f64,
    kernel_size: usize,
    out: *mut *mut DiracProcess,
) -> DiracStatus {
    guard(|| {
        let size = (kernel_size != 0).then_some(kernel_size);
        let p = GaussianBlurProcess::new(grid(height, width)?, w_min, w_max, size)?;
        put(out, DiracProcess(Arc::new(p)))
    })
}

/// Centered Gaussian mask `(1 − g)^k` whose width grows linearly to `w1`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn dirac_process_new_inpaint(
    height: usize,
    width: usize,
    w1: f64,
    k: u32,
    out: *mut *mut DiracProcess,
) -> DiracStatus {
    guard(|| {
        let p = GaussianMaskInpaintProcess::new(grid(height, width)?, w1, k)?;
        put(out, DiracProcess(Arc::new(p)))
    })
}

/// `(1 − t)·x + t·anchor`.
///
/// # Safety
/// `anchor` must hold `height * width` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dirac_process_new_blend(
    height: usize,
    width: usize,
    anchor: *const f64,
    out: *mut *mut DiracProcess,
) -> DiracStatus {
    guard(|| {
        let shape = grid(height, width)?;
        let anchor = read_signal(shape, anchor, shape.len(), "anchor")?;
        put(out, DiracProcess(Arc::new(BlendingProcess::new(anchor)?)))
    })
}

/// Degrades `x` to severity `t`.
///
/// # Safety
/// `process` must be a live handle; `x` and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dirac_process_apply(
    process: *const DiracProcess,
    t: f64,
    x: *const f64,
    out: *mut f64,
    len: usize,
) -> DiracStatus {
    guard(|| {
        let p = &handle(process, "process")?.0;
        let x = read_signal(p.shape(), x, len, "x")?;
        write_signal(&p.apply(t, &x)?, out, len)
    })
}

/// Moves a degraded signal from severity `from` to `to >= from`.
///
/// # Safety
/// `process` must be a live handle; `y` and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dirac_process_transition(
    process: *const DiracProcess,
    from: f64,
    to: f64,
    y: *const f64,
    out: *mut f64,
    len: usize,
) -> DiracStatus {
    guard(|| {
        let p = &handle(process, "process")?.0;
        let y = read_signal(p.shape(), y, len, "y")?;
        write_signal(&p.transition(from, to, &y)?, out, len)
    })
}

/// Simulates a measurement `A_1(x0) + σ_1·z` with a geometric noise schedule.
///
/// # Safety
/// `process` must be a live handle; `x0` and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dirac_measure(
    process: *const DiracProcess,
    sigma_min: f64,
    sigma_max: f64,
    seed: u64,
    x0: *const f64,
    out: *mut f64,
    len: usize,
) -> DiracStatus {
    guard(|| {
        let p = &handle(process, "process")?.0;
        let noise = NoiseSchedule::new(sigma_min, sigma_max)?;
        let x0 = read_signal(p.shape(), x0, len, "x0")?;
        write_signal(&sdp_sample(p.as_ref(), &noise, &x0, 1.0, &mut RandomSource::new(seed))?, out, len)
    })
}

/// # Safety
/// `process` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dirac_process_free(process: *mut DiracProcess) {
    if !process.is_null() {
        drop(Box::from_raw(process));
    }
}

/// Fills `out` with the perception-oriented defaults.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dirac_sampler_options_default(out: *mut DiracSamplerOptions) -> DiracStatus {
    guard(|| {
        let c = SamplerConfig::perception_default(0);
        *out.as_mut().ok_or_else(|| null("out"))? = DiracSamplerOptions {
            delta_t: c.delta_t,
            t_stop: c.t_stop,
            eta: c.eta,
            guidance: DiracGuidance::StdScaled,
            output: DiracOutput::PosteriorMean,
            seed: c.seed,
        };
        Ok(())
    })
}

/// Reconstructs from measurement `y` with the exact posterior-mean denoiser
/// of `prior`. `truth` may be NULL; when given, per-step PSNR is recorded.
///
/// # Safety
/// `prior` and `process` must be live handles, `y` (and `truth` if non-NULL)
/// must hold `len` doubles, `options` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dirac_sample_oracle(
    prior: *const DiracPrior,
    process: *const DiracProcess,
    sigma_min: f64,
    sigma_max: f64,
    y: *const f64,
    truth: *const f64,
    len: usize,
    options: *const DiracSamplerOptions,
    out: *mut *mut DiracTrajectory,
) -> DiracStatus {
    guard(|| {
        let prior = &handle(prior, "prior")?.0;
        let p = &handle(process, "process")?.0;
        let o = handle(options, "options")?;
        if prior.shape() != p.shape() {
            return Err(Error::ShapeMismatch { expected: prior.shape(), found: p.shape() }.into());
        }
        let noise = NoiseSchedule::new(sigma_min, sigma_max)?;
        let y = read_signal(p.shape(), y, len, "y")?;
        let truth = if truth.is_null() { None } else { Some(read_signal(p.shape(), truth, len, "truth")?) };
        let config = SamplerConfig {
            delta_t: o.delta_t,
            t_stop: o.t_stop,
            eta: o.eta,
            guidance: match o.guidance {
                DiracGuidance::None => GuidanceMode::None,
                DiracGuidance::StdScaled => GuidanceMode::StdScaled,
                DiracGuidance::ErrorScaled => GuidanceMode::ErrorScaled,
            },
            output: match o.output {
                DiracOutput::FinalIterate => OutputMode::FinalIterate,
                DiracOutput::PosteriorMean => OutputMode::PosteriorMean,
            },
            variant: IncrementVariant::LookAhead,
            seed: o.seed,
        };
        let oracle = OracleDenoiser::new(prior.clone(), p.clone(), noise)?;
        let observer = Observer { truth: truth.as_ref(), prior: Some(prior) };
        let traj = dirac_sample(&oracle, p.as_ref(), &noise, &y, &config, observer)?;
        put(out, DiracTrajectory(traj))
    })
}

/// Number of executed steps; 0 for a NULL handle.
///
/// # Safety
/// `traj` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dirac_trajectory_len(traj: *const DiracTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.steps.len())
}

/// # Safety
/// `traj` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dirac_trajectory_step(
    traj: *const DiracTrajectory,
    index: usize,
    out: *mut DiracStep,
) -> DiracStatus {
    guard(|| {
        let t = handle(traj, "trajectory")?;
        let s = t.0.steps.get(index).ok_or_else(|| {
            Failure(DiracStatus::InvalidArgument, format!("step {index} out of range ({} steps)", t.0.steps.len()))
        })?;
        *out.as_mut().ok_or_else(|| null("out"))? =
            DiracStep { t: s.t, eps_dc: s.eps_dc, psnr: s.psnr, prior_nll: s.prior_nll };
        Ok(())
    })
}

/// Copies the reconstruction selected by the output mode.
///
/// # Safety
/// `traj` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dirac_trajectory_output(
    traj: *const DiracTrajectory,
    out: *mut f64,
    len: usize,
) -> DiracStatus {
    guard(|| write_signal(&handle(traj, "trajectory")?.0.output, out, len))
}

/// Copies the iterate after the last executed update.
///
/// # Safety
/// `traj` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dirac_trajectory_final_iterate(
    traj: *const DiracTrajectory,
    out: *mut f64,
    len: usize,
) -> DiracStatus {
    guard(|| write_signal(&handle(traj, "trajectory")?.0.final_iterate, out, len))
}

/// # Safety
/// `traj` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dirac_trajectory_free(traj: *mut DiracTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}
