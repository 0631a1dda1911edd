use dirac::degrade::{BlendingProcess, DegradationProcess, GaussianBlurProcess, GaussianMaskInpaintProcess};
use dirac::random::RandomSource;
use dirac::{Shape, Signal};
use proptest::prelude::*;

const SIDE: usize = 12;

fn shape() -> Shape {
    Shape::grid(SIDE, SIDE)
}

fn random_signal(seed: u64) -> Signal {
    let mut rng = RandomSource::new(seed);
    Signal::from_vector(shape(), rng.normal_vector(SIDE * SIDE)).unwrap()
}

fn max_abs_diff(a: &Signal, b: &Signal) -> f64 {
    (a - b).max_abs()
}

fn processes() -> Vec<Box<dyn DegradationProcess>> {
    vec![
        Box::new(GaussianBlurProcess::new(shape(), 0.3, 3.0, None).unwrap()),
        Box::new(GaussianMaskInpaintProcess::new(shape(), 2.4, 4).unwrap()),
        Box::new(BlendingProcess::new(Signal::constant(shape(), 0.25)).unwrap()),
    ]
}

/// Direct circular 2-D convolution with a freshly sampled, normalized kernel.
fn reference_blur(x: &Signal, w: f64, size: usize) -> Signal {
    let half = (size / 2) as i64;
    let raw: Vec<f64> = (-half..=half).map(|i| (-(i * i) as f64 / (2.0 * w * w)).exp()).collect();
    let total: f64 = raw.iter().sum();
    let k: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let n = SIDE as i64;
    let mut out = vec![0.0; SIDE * SIDE];
    for r in 0..n {
        for c in 0..n {
            let mut acc = 0.0;
            for (i, ki) in k.iter().enumerate() {
                for (j, kj) in k.iter().enumerate() {
                    let rr = (r - (i as i64 - half)).rem_euclid(n);
                    let cc = (c - (j as i64 - half)).rem_euclid(n);
                    acc += ki * kj * x.as_slice()[(rr * n + cc) as usize];
                }
            }
            out[(r * n + c) as usize] = acc;
        }
    }
    Signal::new(shape(), out).unwrap()
}

/// `(1 − g/max g)^k` for a Gaussian `g` of width `w` at the middle pixel.
fn reference_mask(w: f64, k: i32) -> Vec<f64> {
    let mid = (SIDE / 2) as f64;
    (0..SIDE * SIDE)
        .map(|i| {
            if w == 0.0 {
                return 1.0;
            }
            let (r, c) = ((i / SIDE) as f64, (i % SIDE) as f64);
            let g = (-((r - mid).powi(2) + (c - mid).powi(2)) / (2.0 * w * w)).exp();
            (1.0 - g).powi(k)
        })
        .collect()
}

#[test]
fn blur_matches_direct_convolution() {
    let p = GaussianBlurProcess::new(shape(), 0.3, 3.0, None).unwrap();
    let x = random_signal(1);
    for t in [0.0, 0.2, 0.5, 1.0] {
        let w = 0.3 + 2.7 * t;
        let expect = reference_blur(&x, w, p.kernel_size());
        assert!(max_abs_diff(&p.apply(t, &x).unwrap(), &expect) < 1e-12, "t = {t}");
    }
}

#[test]
fn inpaint_matches_reference_mask() {
    let p = GaussianMaskInpaintProcess::new(shape(), 2.4, 4).unwrap();
    let x = random_signal(2);
    for t in [0.0, 0.3, 0.7, 1.0] {
        let mask = reference_mask(2.4 * t, 4);
        let expect = Signal::new(shape(), x.as_slice().iter().zip(&mask).map(|(a, m)| a * m).collect()).unwrap();
        assert!(max_abs_diff(&p.apply(t, &x).unwrap(), &expect) < 1e-12, "t = {t}");
    }
}

#[test]
fn matrix_views_agree_with_application() {
    let x = random_signal(3);
    for p in processes() {
        for t in [0.0, 0.35, 0.8, 1.0] {
            let mut via_matrix = Signal::from_vector(shape(), p.as_matrix(t).unwrap() * x.values()).unwrap();
            if let Some(b) = p.offset(t).unwrap() {
                via_matrix = &via_matrix + &b;
            }
            let err = max_abs_diff(&via_matrix, &p.apply(t, &x).unwrap());
            assert!(err < 1e-10, "{} t = {t}: {err}", p.name());
        }
    }
}

#[test]
fn adjoints_match_matrix_transposes() {
    let y = random_signal(4);
    for p in processes() {
        for t in [0.2, 0.9] {
            let expect = p.as_matrix(t).unwrap().transpose() * y.values();
            let got = p.apply_adjoint(t, &y).unwrap();
            assert!((got.values() - expect).amax() < 1e-10, "{} t = {t}", p.name());
        }
    }
}

#[test]
fn inpaint_composition_is_exact() {
    let p = GaussianMaskInpaintProcess::new(shape(), 2.4, 4).unwrap();
    let x = random_signal(5);
    let ts = [0.0, 0.15, 0.4, 0.65, 1.0];
    for i in 0..ts.len() {
        for j in i..ts.len() {
            let moved = p.transition(ts[i], ts[j], &p.apply(ts[i], &x).unwrap()).unwrap();
            assert!(max_abs_diff(&moved, &p.apply(ts[j], &x).unwrap()) <= 1e-12);
            for k in j..ts.len() {
                let a = p.transition(ts[j], ts[k], &moved).unwrap();
                let direct = p.transition(ts[i], ts[k], &p.apply(ts[i], &x).unwrap()).unwrap();
                assert!(max_abs_diff(&a, &direct) <= 1e-12);
            }
        }
    }
}

#[test]
fn blur_composition_within_declared_tolerance() {
    let p = GaussianBlurProcess::new(shape(), 0.3, 3.0, None).unwrap();
    let x = random_signal(6);
    let ts = [0.0, 0.1, 0.45, 0.8, 1.0];
    for i in 0..ts.len() {
        for j in i + 1..ts.len() {
            let moved = p.transition(ts[i], ts[j], &p.apply(ts[i], &x).unwrap()).unwrap();
            let err = max_abs_diff(&moved, &p.apply(ts[j], &x).unwrap());
            assert!(err <= 1e-3, "{} -> {}: {err}", ts[i], ts[j]);
        }
    }
}

#[test]
fn blur_lipschitz_matches_dense_svd() {
    let p = GaussianBlurProcess::new(shape(), 0.3, 3.0, None).unwrap();
    for t in [0.0, 0.5, 1.0] {
        let svd = p.as_matrix(t).unwrap().singular_values();
        let largest = svd.iter().cloned().fold(0.0, f64::max);
        let got = p.lipschitz_x(t).unwrap();
        assert!((got - largest).abs() <= 1e-10 * largest, "t = {t}: {got} vs {largest}");
    }
}

#[test]
fn transition_norms_match_dense_svd() {
    for p in processes() {
        let g = dirac::degrade::transition_matrix(p.as_ref(), 0.3, 0.7).unwrap();
        let largest = g.singular_values().iter().cloned().fold(0.0, f64::max);
        let got = p.transition_lipschitz(0.3, 0.7).unwrap();
        assert!((got - largest).abs() <= 1e-6 * largest.max(1.0), "{}: {got} vs {largest}", p.name());
        assert!(got <= 1.0 + 1e-9, "{} transition expands: {got}", p.name());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn linear_parts_are_linear(seed in 0u64..1000, t in 0.0f64..=1.0, a in -3.0f64..3.0) {
        let x = random_signal(seed);
        let y = random_signal(seed + 7919);
        for p in processes() {
            let lin = |s: &Signal| dirac::degrade::linear_part(p.as_ref(), t, s).unwrap();
            let lhs = lin(&(&x.scaled(a) + &y));
            let rhs = &lin(&x).scaled(a) + &lin(&y);
            prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-10);
        }
    }

    #[test]
    fn transitions_never_expand(seed in 0u64..1000, s in 0.0f64..=1.0, u in 0.0f64..=1.0) {
        let (from, to) = if s <= u { (s, u) } else { (u, s) };
        let x = random_signal(seed);
        for p in processes() {
            let y = p.apply(from, &x).unwrap();
            let moved = p.transition(from, to, &y).unwrap();
            let lin_in = dirac::degrade::linear_part(p.as_ref(), from, &x).unwrap();
            let lin_out = match p.offset(to).unwrap() {
                Some(b) => &moved - &b,
                None => moved,
            };
            prop_assert!(lin_out.norm() <= lin_in.norm() * (1.0 + 1e-9) + 1e-12, "{}", p.name());
        }
    }

    #[test]
    fn severity_outside_unit_interval_is_rejected(t in prop_oneof![-5.0f64..-1e-9, 1.0 + 1e-9..5.0]) {
        let x = random_signal(0);
        for p in processes() {
            prop_assert!(p.apply(t, &x).is_err());
        }
    }
}
