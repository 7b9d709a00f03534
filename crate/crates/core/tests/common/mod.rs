#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use cpvs::{Dataset, Design, InclusionPrior, ModelKind, PriorConfig, Sigma2};

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let s = f(c - h * XGK[i]) + f(c + h * XGK[i]);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (v, err) = gk15(f, a, b);
    if err <= tol || depth == 0 {
        return v;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, depth - 1) + adapt(f, m, b, 0.5 * tol, depth - 1)
}

/// Adaptive Gauss–Kronrod quadrature of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    adapt(f, a, b, tol, 40)
}

/// Nested adaptive quadrature over a rectangle whose inner bounds may depend
/// on the outer variable.
pub fn integrate2(
    f: &dyn Fn(f64, f64) -> f64,
    outer: (f64, f64),
    inner: &dyn Fn(f64) -> (f64, f64),
    tol: f64,
) -> f64 {
    integrate(
        &|x| {
            let (c, d) = inner(x);
            integrate(&|y| f(x, y), c, d, tol)
        },
        outer.0,
        outer.1,
        tol,
    )
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Random series with a few jumps and optional covariate effects.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, p: usize, noise: f64) -> Dataset {
    let x = (p > 0).then(|| DMatrix::from_fn(n, p, |_, _| normal(rng)));
    let beta: Vec<f64> = (0..p).map(|_| if rng.random::<bool>() { 2.0 * normal(rng) } else { 0.0 }).collect();
    let mut level = 2.0 * normal(rng);
    let y = (0..n)
        .map(|i| {
            if i > 0 && rng.random::<f64>() < 0.25 {
                level += 3.0 * normal(rng);
            }
            let mut v = level + noise * normal(rng);
            if let Some(x) = &x {
                for (j, b) in beta.iter().enumerate() {
                    v += b * x[(i, j)];
                }
            }
            v
        })
        .collect();
    Dataset::new(y, x).unwrap()
}

/// A random small instance for comparing the sampler with enumeration.
/// Covers both model kinds, known and estimated variances, sampled `τ²`
/// and a binding covariate cap.
pub fn random_small_instance(rng: &mut ChaCha8Rng) -> (Design, PriorConfig, String) {
    let n = rng.random_range(3..=8);
    let p = rng.random_range(0..=2);
    let data = random_dataset(rng, n, p, 1.0);
    let design = data.design();
    let mut prior = PriorConfig::defaults_for(&design);
    prior.changepoint_prob = rng.random_range(0.1..0.5);
    prior.inclusion = InclusionPrior::Fixed(rng.random_range(0.2..0.8));
    prior.tau2 = rng.random_range(0.5..3.0);
    prior.mean_var = rng.random_range(0.5..3.0);
    prior.kind = if p == 0 && rng.random::<bool>() {
        ModelKind::PiecewiseMean
    } else {
        ModelKind::Regression
    };
    prior.sample_tau2 = prior.kind == ModelKind::PiecewiseMean && rng.random::<bool>();
    prior.sigma2 = if rng.random::<bool>() {
        Sigma2::Known(rng.random_range(0.5..2.0))
    } else {
        Sigma2::Estimate
    };
    prior.max_covariates = if p == 2 && rng.random::<f64>() < 0.3 { 1 } else { p };
    let label = format!(
        "n={n} p={p} kind={:?} sigma2={:?} sample_tau2={} q={}",
        prior.kind, prior.sigma2, prior.sample_tau2, prior.max_covariates
    );
    (design, prior, label)
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn ln_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln() + (x - mean).powi(2) / var)
}

/// Posterior mode and per-coordinate spread of `β` for `y = Xβ + e`,
/// `e ~ N(0, σ²)`, `β ~ N(0, σ²τ² I)`, by dense inversion.
fn posterior_shape(y: &[f64], x: &DMatrix<f64>, tau2: f64) -> (Vec<f64>, Vec<f64>, f64) {
    let k = x.ncols();
    let yv = nalgebra::DVector::from_column_slice(y);
    let a = x.transpose() * x + DMatrix::identity(k, k) / tau2;
    let inv = a.try_inverse().expect("invertible");
    let xty = x.transpose() * &yv;
    let mode = &inv * &xty;
    let quad = yv.dot(&yv) - xty.dot(&mode);
    ((0..k).map(|j| mode[j]).collect(), (0..k).map(|j| inv[(j, j)]).collect(), quad)
}

fn ln_joint(y: &[f64], x: &DMatrix<f64>, beta: &[f64], sigma2: f64, tau2: f64) -> f64 {
    let lik: f64 = y
        .iter()
        .enumerate()
        .map(|(i, &yi)| {
            let fit: f64 = beta.iter().enumerate().map(|(j, b)| x[(i, j)] * b).sum();
            ln_normal(yi, fit, sigma2)
        })
        .sum();
    let prior: f64 = beta.iter().map(|b| ln_normal(*b, 0.0, sigma2 * tau2)).sum();
    lik + prior
}

/// `log ∫ N(y | Xβ, σ²I) N(β | 0, σ²τ²I) dβ` by adaptive quadrature, `k ≤ 2`.
pub fn quadrature_log_evidence(y: &[f64], x: &DMatrix<f64>, sigma2: f64, tau2: f64) -> f64 {
    let k = x.ncols();
    let (mode, var, _) = posterior_shape(y, x, tau2);
    let sd: Vec<f64> = var.iter().map(|v| (sigma2 * v).sqrt()).collect();
    let shift = ln_joint(y, x, &mode, sigma2, tau2);
    let w = 12.0;
    let value = match k {
        0 => return shift,
        1 => integrate(
            &|b| (ln_joint(y, x, &[b], sigma2, tau2) - shift).exp(),
            mode[0] - w * sd[0],
            mode[0] + w * sd[0],
            1e-13 * sd[0],
        ),
        2 => integrate2(
            &|b0, b1| (ln_joint(y, x, &[b0, b1], sigma2, tau2) - shift).exp(),
            (mode[0] - w * sd[0], mode[0] + w * sd[0]),
            &|_| (mode[1] - w * sd[1], mode[1] + w * sd[1]),
            1e-13 * sd[0] * sd[1],
        ),
        _ => panic!("quadrature oracle supports k <= 2"),
    };
    shift + value.ln()
}

/// Evidence with `σ²` integrated against `1/σ²`, via `s = ln σ²`, `k = 1`.
pub fn quadrature_jeffreys_evidence(y: &[f64], x: &DMatrix<f64>, tau2: f64) -> f64 {
    assert_eq!(x.ncols(), 1);
    let n = y.len() as f64;
    let (mode, var, quad) = posterior_shape(y, x, tau2);
    let s0 = (quad / n).ln();
    let shift = ln_joint(y, x, &mode, s0.exp(), tau2);
    let value = integrate2(
        &|s, b| (ln_joint(y, x, &[b], s.exp(), tau2) - shift).exp(),
        (s0 - 12.0, s0 + 12.0),
        &|s| {
            let sd = (s.exp() * var[0]).sqrt();
            (mode[0] - 14.0 * sd, mode[0] + 14.0 * sd)
        },
        1e-13 * (s0.exp() * var[0]).sqrt(),
    );
    shift + value.ln()
}

/// `log ∫ Π N(y_i | μ, a) N(μ | 0, V) dμ` with `a = σ² + τ²`.
pub fn quadrature_mean_block(y: &[f64], sigma2: f64, tau2: f64, v: f64) -> f64 {
    let a = sigma2 + tau2;
    let n = y.len() as f64;
    let s: f64 = y.iter().sum();
    let prec = n / a + 1.0 / v;
    let mode = (s / a) / prec;
    let sd = prec.recip().sqrt();
    let ln_f = |mu: f64| y.iter().map(|&yi| ln_normal(yi, mu, a)).sum::<f64>() + ln_normal(mu, 0.0, v);
    let shift = ln_f(mode);
    shift + integrate(&|mu| (ln_f(mu) - shift).exp(), mode - 12.0 * sd, mode + 12.0 * sd, 1e-13 * sd).ln()
}
