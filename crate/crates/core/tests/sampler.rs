use std::sync::Arc;

use dirac::degrade::{DegradationProcess, GaussianBlurProcess, GaussianMaskInpaintProcess};
use dirac::denoise::{GroundTruthDenoiser, OracleDenoiser};
use dirac::metrics::psnr;
use dirac::prior::GaussianPrior;
use dirac::random::RandomSource;
use dirac::sampler::{dirac_sample, GuidanceMode, IncrementVariant, Observer, OutputMode, SamplerConfig};
use dirac::sdp::{sdp_sample, NoiseSchedule};
use dirac::verify::eps_dc;
use dirac::{Shape, Signal};

fn plain(delta_t: f64) -> SamplerConfig {
    SamplerConfig {
        delta_t,
        t_stop: 0.0,
        eta: 0.0,
        guidance: GuidanceMode::None,
        output: OutputMode::FinalIterate,
        variant: IncrementVariant::LookAhead,
        seed: 1,
    }
}

#[test]
fn noiseless_ground_truth_run_telescopes_to_the_clean_image() {
    let shape = Shape::grid(16, 16);
    let prior = GaussianPrior::squared_exponential(shape, 2.0, 1e-4, 0.5).unwrap();
    let proc = GaussianMaskInpaintProcess::new(shape, 3.2, 4).unwrap();
    let noise = NoiseSchedule::noiseless();
    let x0 = prior.sample_bounded(&mut RandomSource::new(4));
    let y = proc.apply(1.0, &x0).unwrap();
    let target = proc.apply(0.0, &x0).unwrap();
    for delta_t in [0.5, 0.1, 0.02] {
        let traj = dirac_sample(
            &GroundTruthDenoiser::new(x0.clone()),
            &proc,
            &noise,
            &y,
            &plain(delta_t),
            Observer::default(),
        )
        .unwrap();
        let err = (&traj.final_iterate - &target).max_abs();
        assert!(err <= 1e-10, "Δt = {delta_t}: {err}");
        assert_eq!(traj.steps.len(), (1.0 / delta_t).round() as usize);
    }
}

#[test]
fn single_step_run_emits_one_record() {
    let shape = Shape::grid(8, 8);
    let prior = Arc::new(GaussianPrior::squared_exponential(shape, 2.0, 1e-4, 0.5).unwrap());
    let proc: Arc<dyn DegradationProcess> = Arc::new(GaussianBlurProcess::new(shape, 0.3, 3.0, None).unwrap());
    let noise = NoiseSchedule::new(0.01, 0.05).unwrap();
    let oracle = OracleDenoiser::new(prior.clone(), proc.clone(), noise).unwrap();
    let mut rng = RandomSource::new(2);
    let x0 = prior.sample_bounded(&mut rng);
    let y = sdp_sample(proc.as_ref(), &noise, &x0, 1.0, &mut rng).unwrap();
    let config = SamplerConfig::distortion_default(0.98, 3);
    let traj = dirac_sample(&oracle, proc.as_ref(), &noise, &y, &config, Observer::default()).unwrap();
    assert_eq!(traj.steps.len(), 1);
    assert_eq!(traj.steps[0].t, 1.0);
    assert!(traj.output.is_finite());
}

#[test]
fn identical_configs_give_identical_trajectories() {
    let shape = Shape::grid(8, 8);
    let prior = Arc::new(GaussianPrior::squared_exponential(shape, 2.0, 1e-4, 0.5).unwrap());
    let proc: Arc<dyn DegradationProcess> = Arc::new(GaussianMaskInpaintProcess::new(shape, 1.6, 4).unwrap());
    let noise = NoiseSchedule::new(0.01, 0.05).unwrap();
    let oracle = OracleDenoiser::new(prior.clone(), proc.clone(), noise).unwrap();
    let mut rng = RandomSource::new(5);
    let x0 = prior.sample_bounded(&mut rng);
    let y = sdp_sample(proc.as_ref(), &noise, &x0, 1.0, &mut rng).unwrap();
    let observer = Observer { truth: Some(&x0), prior: Some(&prior) };
    let config = SamplerConfig::perception_default(9);
    let a = dirac_sample(&oracle, proc.as_ref(), &noise, &y, &config, observer).unwrap();
    let b = dirac_sample(&oracle, proc.as_ref(), &noise, &y, &config, observer).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.output, b.output);
    let c = dirac_sample(&oracle, proc.as_ref(), &noise, &y, &SamplerConfig { seed: 10, ..config }, observer).unwrap();
    assert_ne!(a.final_iterate, c.final_iterate);
}

#[test]
fn early_stopping_at_the_psnr_peak_does_not_lower_psnr() {
    let shape = Shape::grid(16, 16);
    let prior = Arc::new(GaussianPrior::squared_exponential(shape, 2.0, 1e-4, 0.5).unwrap());
    let proc: Arc<dyn DegradationProcess> = Arc::new(GaussianBlurProcess::new(shape, 0.3, 3.0, None).unwrap());
    let noise = NoiseSchedule::new(0.01, 0.05).unwrap();
    let oracle = OracleDenoiser::new(prior.clone(), proc.clone(), noise).unwrap();
    let mut rng = RandomSource::new(12);
    let x0 = prior.sample_bounded(&mut rng);
    let y = sdp_sample(proc.as_ref(), &noise, &x0, 1.0, &mut rng).unwrap();
    let observer = Observer { truth: Some(&x0), prior: Some(&prior) };
    let mut po = SamplerConfig::perception_default(7);
    po.output = OutputMode::FinalIterate;
    let full = dirac_sample(&oracle, proc.as_ref(), &noise, &y, &po, observer).unwrap();
    let peak = full.steps.iter().max_by(|a, b| a.psnr.total_cmp(&b.psnr)).unwrap();
    // Stopping right after the peak step leaves the peak iterate as the last update's input.
    let stopped =
        dirac_sample(&oracle, proc.as_ref(), &noise, &y, &SamplerConfig { t_stop: peak.t, ..po }, observer).unwrap();
    let do_psnr = psnr(&stopped.final_iterate, &x0, 1.0).unwrap();
    let po_psnr = psnr(&full.final_iterate, &x0, 1.0).unwrap();
    assert!(do_psnr >= po_psnr, "DO {do_psnr} < PO {po_psnr}");
    assert_eq!(stopped.final_iterate, peak.iterate);
}

#[test]
fn measurement_agreement_of_the_truth_sits_at_the_noise_floor() {
    let shape = Shape::grid(8, 8);
    let prior = GaussianPrior::squared_exponential(shape, 2.0, 1e-4, 0.5).unwrap();
    let proc = GaussianBlurProcess::new(shape, 0.3, 3.0, None).unwrap();
    let noise = NoiseSchedule::new(0.01, 0.05).unwrap();
    let mut rng = RandomSource::new(6);
    let draws = 1000;
    let values: Vec<f64> = (0..draws)
        .map(|_| {
            let x0 = prior.sample(&mut rng);
            let y = sdp_sample(&proc, &noise, &x0, 1.0, &mut rng).unwrap();
            eps_dc(&proc, &y, &x0).unwrap()
        })
        .collect();
    let mean = values.iter().sum::<f64>() / draws as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    let se = (var / draws as f64).sqrt();
    assert!((mean - 0.0025).abs() <= 3.0 * se, "mean {mean}, se {se}");
    let noiseless = proc.apply(1.0, &Signal::constant(shape, 0.3)).unwrap();
    assert_eq!(eps_dc(&proc, &noiseless, &Signal::constant(shape, 0.3)).unwrap(), 0.0);
}
